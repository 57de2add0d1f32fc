//! JSONL dataset formats. One record per line, validated field by field so
//! errors name the line and the offending field.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use decisionflow_core::{parse_constraint, ChoiceIndexing, ConstraintKind, DecisionProblem, ProblemError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: field `{field}`: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
}

impl DatasetError {
    /// The field a record-level error names, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::Field { field, .. } => Some(field),
            Self::DuplicateId { .. } => Some("id"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dma {
    ProtocolFocus,
    Fairness,
    RiskAversion,
    ContinuingCare,
    MoralDesert,
    Utilitarianism,
}

impl Dma {
    pub const ALL: [Dma; 6] = [
        Self::ProtocolFocus,
        Self::Fairness,
        Self::RiskAversion,
        Self::ContinuingCare,
        Self::MoralDesert,
        Self::Utilitarianism,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    High,
    Low,
}

impl fmt::Display for Alignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::High => "high",
            Self::Low => "low",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MtaRecord {
    pub id: String,
    pub scenario: String,
    pub choices: Vec<String>,
    pub dma: Dma,
    pub alignment: Alignment,
    pub bias_text: String,
    /// 0-based index into `choices`.
    pub gold: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Agriculture,
    Stocks,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DellmaRecord {
    pub id: String,
    pub domain: Domain,
    /// Report text or a preformatted price history.
    pub context: String,
    pub actions: Vec<String>,
    /// 0-based index into `actions`.
    pub gold: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<String>,
}

pub const MIN_DELLMA_ACTIONS: usize = 2;
pub const MAX_DELLMA_ACTIONS: usize = 7;

impl Domain {
    fn default_goal(self) -> &'static str {
        match self {
            Self::Agriculture => {
                "Choose the single crop to plant that maximizes the farmer's expected revenue next season."
            }
            Self::Stocks => {
                "Choose the single stock to buy that maximizes the expected return at the end of the holding period."
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Mta,
    Dellma,
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mta" => Ok(Self::Mta),
            "dellma" => Ok(Self::Dellma),
            _ => Err(format!("unknown dataset kind `{s}` (expected mta or dellma)")),
        }
    }
}

/// How accuracy is grouped for a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Alignment(Alignment),
    ActionCount(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Dataset {
    Mta(Vec<MtaRecord>),
    Dellma(Vec<DellmaRecord>),
}

fn field_err(line: usize, field: &str, message: impl Into<String>) -> DatasetError {
    DatasetError::Field {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

struct Fields {
    line: usize,
    map: Map<String, Value>,
}

impl Fields {
    fn required<T: DeserializeOwned>(&mut self, name: &str) -> Result<T, DatasetError> {
        let v = self
            .map
            .remove(name)
            .ok_or_else(|| field_err(self.line, name, "missing"))?;
        serde_json::from_value(v).map_err(|e| field_err(self.line, name, e.to_string()))
    }

    fn optional<T: DeserializeOwned>(&mut self, name: &str) -> Result<Option<T>, DatasetError> {
        match self.map.remove(name) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v)
                .map(Some)
                .map_err(|e| field_err(self.line, name, e.to_string())),
        }
    }

    fn done(self) -> Result<(), DatasetError> {
        match self.map.keys().next() {
            Some(k) => Err(field_err(self.line, k, "unknown field")),
            None => Ok(()),
        }
    }
}

fn non_empty(line: usize, field: &str, s: &str) -> Result<(), DatasetError> {
    if s.trim().is_empty() {
        Err(field_err(line, field, "must be non-empty"))
    } else {
        Ok(())
    }
}

fn check_labels(line: usize, field: &str, labels: &[String]) -> Result<(), DatasetError> {
    let mut seen = HashSet::new();
    for l in labels {
        non_empty(line, field, l)?;
        if !seen.insert(l.trim()) {
            return Err(field_err(line, field, format!("duplicate label `{l}`")));
        }
    }
    Ok(())
}

fn check_gold(line: usize, gold: usize, n: usize) -> Result<(), DatasetError> {
    if gold >= n {
        Err(field_err(line, "gold", format!("index {gold} out of range for {n} choices")))
    } else {
        Ok(())
    }
}

fn check_constraints(line: usize, constraints: &[String], n: usize) -> Result<(), DatasetError> {
    for text in constraints {
        if let ConstraintKind::Exclusion { action } = parse_constraint(text).kind {
            if action >= n {
                return Err(field_err(
                    line,
                    "constraints",
                    format!("`{text}` excludes a choice that does not exist"),
                ));
            }
        }
    }
    Ok(())
}

impl MtaRecord {
    fn from_fields(mut f: Fields) -> Result<Self, DatasetError> {
        let line = f.line;
        let r = Self {
            id: f.required("id")?,
            scenario: f.required("scenario")?,
            choices: f.required("choices")?,
            dma: f.required("dma")?,
            alignment: f.required("alignment")?,
            bias_text: f.required("bias_text")?,
            gold: f.required("gold")?,
            constraints: f.optional("constraints")?.unwrap_or_default(),
        };
        f.done()?;
        non_empty(line, "id", &r.id)?;
        non_empty(line, "scenario", &r.scenario)?;
        if r.choices.len() < 2 {
            return Err(field_err(line, "choices", "at least two choices required"));
        }
        check_labels(line, "choices", &r.choices)?;
        non_empty(line, "bias_text", &r.bias_text)?;
        check_gold(line, r.gold, r.choices.len())?;
        check_constraints(line, &r.constraints, r.choices.len())?;
        Ok(r)
    }

    pub fn to_problem(&self) -> Result<DecisionProblem, ProblemError> {
        DecisionProblem::new(&self.id, &self.scenario, self.choices.clone())?
            .with_constraints(self.constraints.iter().map(|c| parse_constraint(c)).collect())?
            .with_bias(&self.bias_text)
            .with_gold(self.gold)
            .map(|p| p.with_indexing(ChoiceIndexing::OneBased))
    }
}

impl DellmaRecord {
    fn from_fields(mut f: Fields) -> Result<Self, DatasetError> {
        let line = f.line;
        let r = Self {
            id: f.required("id")?,
            domain: f.required("domain")?,
            context: f.required("context")?,
            actions: f.required("actions")?,
            gold: f.required("gold")?,
            goal: f.optional("goal")?,
            constraints: f.optional("constraints")?.unwrap_or_default(),
        };
        f.done()?;
        non_empty(line, "id", &r.id)?;
        non_empty(line, "context", &r.context)?;
        if !(MIN_DELLMA_ACTIONS..=MAX_DELLMA_ACTIONS).contains(&r.actions.len()) {
            return Err(field_err(
                line,
                "actions",
                format!(
                    "{} actions; between {MIN_DELLMA_ACTIONS} and {MAX_DELLMA_ACTIONS} required",
                    r.actions.len()
                ),
            ));
        }
        check_labels(line, "actions", &r.actions)?;
        if let Some(goal) = &r.goal {
            non_empty(line, "goal", goal)?;
        }
        check_gold(line, r.gold, r.actions.len())?;
        check_constraints(line, &r.constraints, r.actions.len())?;
        Ok(r)
    }

    pub fn to_problem(&self) -> Result<DecisionProblem, ProblemError> {
        let goal = self.goal.as_deref().unwrap_or(self.domain.default_goal());
        DecisionProblem::new(&self.id, &self.context, self.actions.clone())?
            .with_constraints(self.constraints.iter().map(|c| parse_constraint(c)).collect())?
            .with_bias(goal)
            .with_gold(self.gold)
            .map(|p| p.with_indexing(ChoiceIndexing::OneBased))
    }
}

impl Dataset {
    pub fn load(path: &Path, kind: DatasetKind) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, kind)
    }

    /// Parses JSONL text; blank lines are skipped, line numbers are 1-based.
    pub fn parse(text: &str, kind: DatasetKind) -> Result<Self, DatasetError> {
        let mut ids = HashSet::new();
        let mut mta = Vec::new();
        let mut dellma = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let map = match serde_json::from_str::<Value>(raw) {
                Ok(Value::Object(map)) => map,
                Ok(_) => {
                    return Err(DatasetError::Line {
                        line,
                        message: "record is not a JSON object".into(),
                    })
                }
                Err(e) => {
                    return Err(DatasetError::Line {
                        line,
                        message: e.to_string(),
                    })
                }
            };
            let fields = Fields { line, map };
            let id = match kind {
                DatasetKind::Mta => {
                    let r = MtaRecord::from_fields(fields)?;
                    let id = r.id.clone();
                    mta.push(r);
                    id
                }
                DatasetKind::Dellma => {
                    let r = DellmaRecord::from_fields(fields)?;
                    let id = r.id.clone();
                    dellma.push(r);
                    id
                }
            };
            if !ids.insert(id.clone()) {
                return Err(DatasetError::DuplicateId { line, id });
            }
        }
        Ok(match kind {
            DatasetKind::Mta => Self::Mta(mta),
            DatasetKind::Dellma => Self::Dellma(dellma),
        })
    }

    pub fn kind(&self) -> DatasetKind {
        match self {
            Self::Mta(_) => DatasetKind::Mta,
            Self::Dellma(_) => DatasetKind::Dellma,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Mta(r) => r.len(),
            Self::Dellma(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Canonical JSONL: struct field order, compact, LF-terminated lines.
    pub fn to_jsonl(&self) -> String {
        fn lines<T: Serialize>(rows: &[T]) -> String {
            rows.iter()
                .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
                .collect()
        }
        match self {
            Self::Mta(r) => lines(r),
            Self::Dellma(r) => lines(r),
        }
    }

    pub fn ids(&self) -> Vec<&str> {
        match self {
            Self::Mta(r) => r.iter().map(|x| x.id.as_str()).collect(),
            Self::Dellma(r) => r.iter().map(|x| x.id.as_str()).collect(),
        }
    }

    pub fn problems(&self) -> Result<Vec<DecisionProblem>, ProblemError> {
        match self {
            Self::Mta(r) => r.iter().map(MtaRecord::to_problem).collect(),
            Self::Dellma(r) => r.iter().map(DellmaRecord::to_problem).collect(),
        }
    }

    /// Gold answer and accuracy group of `id`.
    pub fn lookup(&self, id: &str) -> Option<(usize, Group)> {
        match self {
            Self::Mta(r) => r
                .iter()
                .find(|x| x.id == id)
                .map(|x| (x.gold, Group::Alignment(x.alignment))),
            Self::Dellma(r) => r
                .iter()
                .find(|x| x.id == id)
                .map(|x| (x.gold, Group::ActionCount(x.actions.len()))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MTA: &str = r#"{"id":"a","scenario":"s","choices":["x","y"],"dma":"fairness","alignment":"high","bias_text":"b","gold":1}"#;

    #[test]
    fn loads_and_round_trips() {
        let d = Dataset::parse(&format!("{MTA}\n"), DatasetKind::Mta).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.to_jsonl(), format!("{MTA}\n"));
        assert_eq!(d.lookup("a"), Some((1, Group::Alignment(Alignment::High))));
    }

    #[test]
    fn gold_out_of_range_names_line_and_field() {
        let bad = MTA.replace("\"gold\":1", "\"gold\":5");
        let err = Dataset::parse(&format!("{MTA}\n{bad}\n"), DatasetKind::Mta).unwrap_err();
        match &err {
            DatasetError::Field { line, field, .. } => {
                assert_eq!((*line, field.as_str()), (2, "gold"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let err = Dataset::parse(&format!("{MTA}\n{MTA}\n"), DatasetKind::Mta).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn unknown_dma_and_extra_field() {
        let bad = MTA.replace("fairness", "bravery");
        assert_eq!(Dataset::parse(&bad, DatasetKind::Mta).unwrap_err().field(), Some("dma"));
        let extra = MTA.replace("\"gold\":1", "\"gold\":1,\"note\":\"x\"");
        assert_eq!(Dataset::parse(&extra, DatasetKind::Mta).unwrap_err().field(), Some("note"));
    }

    #[test]
    fn dellma_action_bounds() {
        let rec = |k: usize| {
            let actions: Vec<String> = (1..=k).map(|i| format!("crop {i}")).collect();
            serde_json::json!({"id": "d", "domain": "agriculture", "context": "c", "actions": actions, "gold": 0})
                .to_string()
        };
        assert!(Dataset::parse(&rec(7), DatasetKind::Dellma).is_ok());
        assert!(Dataset::parse(&rec(2), DatasetKind::Dellma).is_ok());
        assert_eq!(Dataset::parse(&rec(8), DatasetKind::Dellma).unwrap_err().field(), Some("actions"));
        assert_eq!(Dataset::parse(&rec(1), DatasetKind::Dellma).unwrap_err().field(), Some("actions"));
    }

    #[test]
    fn problems_carry_bias_and_indexing() {
        let d = Dataset::parse(MTA, DatasetKind::Mta).unwrap();
        let p = &d.problems().unwrap()[0];
        assert_eq!(p.bias_directive(), Some("b"));
        assert_eq!(p.gold_answer(), Some(1));
        assert_eq!(p.indexing(), ChoiceIndexing::OneBased);
    }
}
