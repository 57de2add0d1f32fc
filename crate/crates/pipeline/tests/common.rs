#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use decisionflow_core::DecisionProblem;
use decisionflow_gateway::{Gateway, GatewayConfig, TranscriptStore};
use decisionflow_pipeline::{Dataset, DatasetKind, Mode, Pipeline, PipelineConfig};
use decisionflow_stages::TemplateSet;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn replay_gateway() -> Arc<Gateway> {
    let store = TranscriptStore::open_existing(fixtures().join("corpus")).unwrap();
    Arc::new(Gateway::replay(store, GatewayConfig::default()))
}

pub fn config(name: &str, mode: Mode) -> PipelineConfig {
    let text = std::fs::read_to_string(fixtures().join(format!("{name}.run.json"))).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let base: PipelineConfig = serde_json::from_value(v["pipeline"].clone()).unwrap();
    PipelineConfig { mode, ..base }
}

pub fn problems(name: &str) -> Vec<DecisionProblem> {
    let kind = if name == "dellma" { DatasetKind::Dellma } else { DatasetKind::Mta };
    Dataset::load(&fixtures().join(format!("{name}.jsonl")), kind)
        .unwrap()
        .problems()
        .unwrap()
}

pub fn problem(name: &str, id: &str) -> DecisionProblem {
    problems(name).into_iter().find(|p| p.id() == id).unwrap()
}

pub fn pipeline(gateway: &Arc<Gateway>, name: &str, mode: Mode) -> Pipeline {
    Pipeline::new(Arc::clone(gateway), TemplateSet::builtin(), config(name, mode)).unwrap()
}
