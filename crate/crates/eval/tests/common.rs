#![allow(dead_code)]

use decisionflow_pipeline::{Dataset, DatasetKind, Mode, PredictionFile, PredictionRow};
use serde_json::json;

/// MTA dataset with `high` high-alignment and `low` low-alignment records, gold 0.
pub fn mta(high: usize, low: usize) -> Dataset {
    let mut text = String::new();
    for (alignment, n) in [("high", high), ("low", low)] {
        for k in 0..n {
            let r = json!({
                "id": format!("{alignment}-{k}"),
                "scenario": "Two casualties, one medic.",
                "choices": ["Treat A", "Treat B"],
                "dma": "fairness",
                "alignment": alignment,
                "bias_text": "Treat people by need alone.",
                "gold": 0
            });
            text += &format!("{r}\n");
        }
    }
    Dataset::parse(&text, DatasetKind::Mta).unwrap()
}

/// DeLLMa dataset with `counts[i]` records of `i + 2` actions, gold 0.
pub fn dellma(counts: &[usize]) -> Dataset {
    let mut text = String::new();
    for (i, &n) in counts.iter().enumerate() {
        let actions: Vec<String> = (0..i + 2).map(|a| format!("Plant crop {a}")).collect();
        for k in 0..n {
            let r = json!({
                "id": format!("a{}-{k}", i + 2),
                "domain": "agriculture",
                "context": "Prices were flat.",
                "actions": actions,
                "gold": 0
            });
            text += &format!("{r}\n");
        }
    }
    Dataset::parse(&text, DatasetKind::Dellma).unwrap()
}

pub fn row(id: &str, mode: Mode, repeat: u32, answer: Option<usize>) -> PredictionRow {
    PredictionRow {
        id: id.into(),
        mode,
        repeat,
        abstain: answer.is_none().then(|| "weigh:parse".to_string()),
        answer,
    }
}

/// One row per id in `ids`; the first `correct` are right, the rest answer 1.
pub fn rows_with(ids: &[&str], correct: usize, mode: Mode, repeat: u32) -> Vec<PredictionRow> {
    ids.iter()
        .enumerate()
        .map(|(k, id)| row(id, mode, repeat, Some(if k < correct { 0 } else { 1 })))
        .collect()
}

pub fn ids_with_prefix<'a>(ds: &'a Dataset, prefix: &str) -> Vec<&'a str> {
    ds.ids().into_iter().filter(|id| id.starts_with(prefix)).collect()
}

pub fn file(rows: Vec<PredictionRow>) -> PredictionFile {
    PredictionFile { rows }
}
