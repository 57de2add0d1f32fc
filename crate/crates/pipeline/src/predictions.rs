use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::config::Mode;
use crate::dataset::{Dataset, DatasetError};
use crate::record::RunRecord;

/// One prediction: exactly one of `answer` and `abstain` is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRow {
    pub id: String,
    pub mode: Mode,
    pub repeat: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abstain: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PredictionFile {
    pub rows: Vec<PredictionRow>,
}

/// One row per record, ordered by (id, repeat).
pub fn write_predictions(records: &[RunRecord]) -> PredictionFile {
    let mut rows: Vec<PredictionRow> = records
        .iter()
        .map(|r| PredictionRow {
            id: r.problem_id.clone(),
            mode: r.mode,
            repeat: r.repeat,
            answer: r.answer,
            abstain: r.abstain.as_ref().map(|a| a.class.clone()),
        })
        .collect();
    rows.sort_by(|a, b| (&a.id, a.repeat, a.mode).cmp(&(&b.id, b.repeat, b.mode)));
    PredictionFile { rows }
}

impl PredictionFile {
    pub fn to_jsonl(&self) -> String {
        self.rows
            .iter()
            .map(|r| serde_json::to_string(r).expect("rows serialize") + "\n")
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut rows = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let row: PredictionRow = serde_json::from_str(raw).map_err(|e| DatasetError::Line {
                line,
                message: e.to_string(),
            })?;
            if row.answer.is_some() == row.abstain.is_some() {
                return Err(DatasetError::Field {
                    line,
                    field: "answer".into(),
                    message: "exactly one of `answer` and `abstain` is required".into(),
                });
            }
            rows.push(row);
        }
        Ok(Self { rows })
    }

    /// Ids not present in `dataset`.
    pub fn unknown_ids<'a>(&'a self, dataset: &Dataset) -> Vec<&'a str> {
        let known: HashSet<&str> = dataset.ids().into_iter().collect();
        self.rows
            .iter()
            .map(|r| r.id.as_str())
            .filter(|id| !known.contains(id))
            .collect()
    }

    pub fn repeats(&self) -> Vec<u32> {
        let mut r: Vec<u32> = self.rows.iter().map(|r| r.repeat).collect();
        r.sort_unstable();
        r.dedup();
        r
    }
}
