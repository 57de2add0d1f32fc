//! Table-driven parser cases: a completion, the parser to run and either the
//! expected payload or the expected error class.

use decisionflow_core::{AttributeTable, ChoiceIndexing, RelevanceCell, WeightMatrix};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::StageError;
use crate::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParserKind {
    Json,
    Extraction,
    AttributeTable,
    Weight,
    Decision,
    Grounding,
    Rationale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Serialized payload; for `json` the extracted object itself.
    Ok(Value),
    /// Error class as returned by [`StageError::class`].
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusCase {
    pub name: String,
    pub parser: ParserKind,
    pub text: String,
    #[serde(default)]
    pub actions: Vec<String>,
    #[serde(default)]
    pub indexing: ChoiceIndexing,
    /// Attribute names and verbal cells for grounding cases.
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub cells: Vec<Vec<String>>,
    #[serde(default)]
    pub weights: Vec<Vec<f64>>,
    /// Expected number of repairs, when the case pins it.
    #[serde(default)]
    pub repairs: Option<usize>,
    pub expect: Expectation,
}

/// Outcome of one case: the payload and repair count, or the error class.
pub fn run_case(case: &CorpusCase) -> Result<(Value, usize), String> {
    let class = |e: StageError| e.class().to_string();
    let pack = |v: Value, repairs: usize| Ok((v, repairs));
    match case.parser {
        ParserKind::Json => {
            let b = crate::json::extract_json_block(&case.text).map_err(class)?;
            pack(b.value, b.repairs.len())
        }
        ParserKind::Extraction => {
            let o = parse::parse_extraction(&case.text, &case.actions).map_err(class)?;
            pack(to_value(&o.parsed), o.repairs.len())
        }
        ParserKind::AttributeTable => {
            let o = parse::parse_attribute_table(&case.text, &case.actions).map_err(class)?;
            pack(to_value(&o.parsed), o.repairs.len())
        }
        ParserKind::Weight => {
            let o = parse::parse_weight(&case.text).map_err(class)?;
            pack(to_value(&o.parsed), o.repairs.len())
        }
        ParserKind::Decision => {
            let o = parse::parse_decision(&case.text, case.actions.len(), case.indexing)
                .map_err(class)?;
            pack(to_value(&o.parsed), o.repairs.len())
        }
        ParserKind::Grounding => {
            let cells = case
                .cells
                .iter()
                .map(|row| row.iter().map(RelevanceCell::verbal).collect())
                .collect();
            let table = AttributeTable::new(case.actions.len(), case.attributes.clone(), cells)
                .map_err(|e| format!("bad case table: {e}"))?;
            let w = WeightMatrix::from_rows(&case.weights).map_err(|e| format!("bad case weights: {e}"))?;
            let o = parse::ground_relevance(&case.text, &case.actions, &table, &w).map_err(class)?;
            pack(to_value(&o.parsed.scores), o.repairs.len())
        }
        ParserKind::Rationale => {
            let o = parse::parse_rationale(&case.text).map_err(class)?;
            pack(Value::String(o.parsed), o.repairs.len())
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("payloads serialize")
}

/// `None` when the case behaves as documented, otherwise a description.
pub fn check_case(case: &CorpusCase) -> Option<String> {
    match (run_case(case), &case.expect) {
        (Ok((value, repairs)), Expectation::Ok(want)) => {
            if value != *want {
                return Some(format!("payload {value} != expected {want}"));
            }
            match case.repairs {
                Some(n) if n != repairs => Some(format!("{repairs} repairs, expected {n}")),
                _ => None,
            }
        }
        (Err(got), Expectation::Error(want)) if got == *want => None,
        (Ok((value, _)), Expectation::Error(want)) => Some(format!("expected {want} error, got {value}")),
        (Err(got), _) => Some(format!("unexpected error: {got}")),
    }
}

pub fn load_corpus(jsonl: &str) -> Result<Vec<CorpusCase>, String> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", i + 1)))
        .collect()
}
