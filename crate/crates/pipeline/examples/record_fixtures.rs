//! Regenerates the bundled replay corpus from `fixtures/scripts.jsonl`.
//!
//! Every fixture problem is run in every mode against a scripted backend in
//! record mode, so later replays need no network and no scripts.
//!
//!     cargo run -p decisionflow-pipeline --example record_fixtures [fixtures-dir]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use decisionflow_core::{DecisionProblem, Stage};
use decisionflow_gateway::{
    BackendFailure, BackendReply, CompletionRequest, Gateway, GatewayConfig, ScriptedBackend,
    TranscriptStore,
};
use decisionflow_pipeline::{Dataset, DatasetKind, Mode, Pipeline, PipelineConfig};
use decisionflow_stages::TemplateSet;
use serde::Deserialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Deserialize)]
struct Script {
    id: String,
    information: Vec<String>,
    attributes: Vec<String>,
    values: Vec<Vec<Option<String>>>,
    weights: Vec<Vec<f64>>,
    scores: Vec<Vec<f64>>,
    zero_shot: Vec<u32>,
    cot: Vec<u32>,
    samples: Vec<Vec<u32>>,
    joint: Vec<u32>,
    style: String,
    #[serde(default)]
    joint_text: Option<String>,
    #[serde(default)]
    cot_text: Option<String>,
}

struct Current {
    script: Script,
    actions: Vec<String>,
    k: u32,
}

const REPEATED: [Mode; 4] = [Mode::Decisionflow, Mode::ZeroShot, Mode::Cot, Mode::SelfConsistency];
const REPEATS: u32 = 3;

fn quoted_after<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let start = line.find(key)? + key.len();
    let rest = &line[start..];
    Some(&rest[..rest.find('"')?])
}

fn styled(value: &Value, style: &str) -> String {
    match style {
        "prose" => format!(
            "Here is my assessment.\n{}\nI hope this helps.",
            serde_json::to_string(value).unwrap()
        ),
        "trailing_comma" => {
            let pretty = serde_json::to_string_pretty(value).unwrap();
            let cut = pretty.rfind('\n').unwrap();
            format!("```json\n{},{}\n```", &pretty[..cut], &pretty[cut..])
        }
        _ => format!("```json\n{}\n```", serde_json::to_string_pretty(value).unwrap()),
    }
}

fn respond(cur: &Current, req: &CompletionRequest) -> String {
    let s = &cur.script;
    let index = |label: &str| cur.actions.iter().position(|a| a == label).expect("known label");
    let column = |attr: &str| s.attributes.iter().position(|a| a == attr).expect("known attribute");
    let value = match req.stage {
        Stage::ExtractInfo => json!({"information": s.information}),
        Stage::SummarizeAttributes => {
            let vars: Vec<Value> = cur
                .actions
                .iter()
                .enumerate()
                .map(|(i, label)| {
                    let attrs: Vec<Value> = s
                        .attributes
                        .iter()
                        .zip(&s.values[i])
                        .filter_map(|(a, v)| v.as_ref().map(|v| json!({"Attribute": a, "Value": [v]})))
                        .collect();
                    json!({"Variable": label, "Attribute": attrs})
                })
                .collect();
            json!({"Variable": vars})
        }
        Stage::Weigh => {
            let p = &req.prompt;
            let var = p.lines().find_map(|l| l.strip_prefix("Variable: \"")).unwrap();
            let attr = p.lines().find_map(|l| l.strip_prefix("Attribute: \"")).unwrap();
            let (i, j) = (index(var.trim_end_matches('"')), column(attr.trim_end_matches('"')));
            let w = s.weights[i][j];
            let strength = if w >= 0.75 { "strongly" } else if w >= 0.4 { "moderately" } else { "weakly" };
            json!({"Explanation": format!("{} {strength} bears on the target bias.", s.attributes[j]), "Weight": w})
        }
        Stage::GroundAndDecide => {
            let mut scores = Vec::new();
            let mut totals = vec![0.0; cur.actions.len()];
            for line in req.prompt.lines().filter(|l| l.starts_with("- Variable: \"")) {
                let var = quoted_after(line, "Variable: \"").unwrap();
                let attr = quoted_after(line, "Attribute: \"").unwrap();
                let (i, j) = (index(var), column(attr));
                totals[i] += s.scores[i][j] * s.weights[i][j];
                scores.push(json!({"Variable": var, "Attribute": attr, "Score": s.scores[i][j]}));
            }
            let best = (0..totals.len()).fold(0, |b, i| if totals[i] > totals[b] { i } else { b });
            json!({"Scores": scores, "Reasoning": "Scores follow the pairwise comparison of attribute values.", "Answer": best + 1})
        }
        Stage::Rationale => {
            let chosen = req.prompt.lines().find_map(|l| l.strip_prefix("Selected choice: ")).unwrap();
            json!({"Rationale": format!("{chosen} has the highest utility among the feasible choices; its strongest attributes outweigh those of the next-best alternative.")})
        }
        Stage::ZeroShot => {
            let answer = if req.temperature > 0.0 {
                s.samples[(req.attempt / cur.k) as usize][(req.attempt % cur.k) as usize]
            } else {
                s.zero_shot[req.attempt as usize]
            };
            json!({"Answer": answer})
        }
        Stage::Cot => match &s.cot_text {
            Some(t) => return t.clone(),
            None => json!({"Reasoning": "Considering the target bias step by step.", "Answer": s.cot[req.attempt as usize]}),
        },
        Stage::Joint => match &s.joint_text {
            Some(t) => return t.clone(),
            None => json!({"Reasoning": "Worked through the four steps.", "Answer": s.joint[0]}),
        },
    };
    styled(&value, &s.style)
}

fn load_config(path: &Path) -> PipelineConfig {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    serde_json::from_value(v["pipeline"].clone()).unwrap()
}

fn main() {
    let dir = std::env::args().nth(1).map_or_else(
        || PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures"),
        PathBuf::from,
    );
    let scripts: HashMap<String, Script> = std::fs::read_to_string(dir.join("scripts.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str::<Script>(l).unwrap())
        .map(|s| (s.id.clone(), s))
        .collect();

    let current: Arc<Mutex<Option<Current>>> = Arc::new(Mutex::new(None));
    let shared = Arc::clone(&current);
    let backend = ScriptedBackend::new(move |req| {
        let guard = shared.lock().unwrap();
        let cur = guard.as_ref().ok_or(BackendFailure::Transport("no problem loaded".into()))?;
        let text = respond(cur, req);
        let millis = 150 + 2 * text.split_whitespace().count() as u64;
        Ok(BackendReply {
            text,
            usage: None,
            latency: Some(Duration::from_millis(millis)),
        })
    });
    let store = TranscriptStore::open(dir.join("corpus")).unwrap();
    let gateway = Arc::new(Gateway::record(Arc::new(backend), store, GatewayConfig::default()));

    for (name, kind) in [
        ("mta", DatasetKind::Mta),
        ("dellma", DatasetKind::Dellma),
        ("case_studies", DatasetKind::Mta),
    ] {
        let base = load_config(&dir.join(format!("{name}.run.json")));
        let dataset = Dataset::load(&dir.join(format!("{name}.jsonl")), kind).unwrap();
        let problems: Vec<DecisionProblem> = dataset.problems().unwrap();
        for problem in &problems {
            *current.lock().unwrap() = Some(Current {
                script: scripts[problem.id()].clone(),
                actions: problem.actions().to_vec(),
                k: base.self_consistency_k,
            });
            for mode in Mode::ALL {
                let config = PipelineConfig { mode, ..base.clone() };
                let pipeline = Pipeline::new(Arc::clone(&gateway), TemplateSet::builtin(), config).unwrap();
                let repeats = if REPEATED.contains(&mode) { REPEATS } else { 1 };
                for repeat in 0..repeats {
                    match pipeline.run(problem, repeat) {
                        Ok(o) => println!("{name} {} {mode} r{repeat}: answer {}", problem.id(), o.answer),
                        Err(e) => println!("{name} {} {mode} r{repeat}: abstained ({})", problem.id(), e.class()),
                    }
                }
            }
        }
    }
    let stats = gateway.stats();
    println!(
        "{} requests, {} recorded, {} served from the corpus",
        stats.requests, stats.network_calls, stats.cache_hits
    );
}
