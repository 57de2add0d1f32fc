//! Completion text to typed stage artifacts.

use std::collections::BTreeMap;

use decisionflow_core::{
    canonical_attribute, AttributeTable, ChoiceIndexing, Grid, RelevanceCell, WeightMatrix,
};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::StageError;
use crate::json::extract_json_block;

/// A parsed payload together with the text it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutput<T> {
    pub raw: String,
    pub parsed: T,
    /// Syntactic repairs applied before the object parsed; empty for clean text.
    pub repairs: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub statements: Vec<String>,
    /// No statements came back.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightJudgement {
    pub explanation: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub reasoning: String,
    /// 0-based.
    pub answer: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    /// `n x m` scores; zero outside the surviving, mentioned cells.
    pub scores: Grid,
    pub reasoning: String,
    /// The model's own pick, kept for the trace only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_answer: Option<Value>,
}

struct Object {
    raw: String,
    map: Map<String, Value>,
    repairs: Vec<String>,
    warnings: Vec<String>,
}

impl Object {
    fn parse(text: &str) -> Result<Self, StageError> {
        let block = extract_json_block(text)?;
        let Value::Object(map) = block.value else {
            unreachable!("extract_json_block only yields objects")
        };
        Ok(Self {
            raw: text.to_string(),
            map,
            repairs: block.repairs.iter().map(ToString::to_string).collect(),
            warnings: Vec::new(),
        })
    }

    fn finish<T>(self, parsed: T) -> StageOutput<T> {
        StageOutput {
            raw: self.raw,
            parsed,
            repairs: self.repairs,
            warnings: self.warnings,
        }
    }
}

/// Case- and punctuation-insensitive key lookup.
fn field<'v>(map: &'v Map<String, Value>, key: &str) -> Option<&'v Value> {
    map.get(key).or_else(|| {
        let want = canonical_attribute(key);
        map.iter()
            .find(|(k, _)| canonical_attribute(k) == want)
            .map(|(_, v)| v)
    })
}

fn text_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.trim().to_string(),
        Value::Array(items) => items.iter().map(text_of).collect::<Vec<_>>().join("; "),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn number_of(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse::<f64>().ok().filter(|x| x.is_finite()),
        _ => None,
    }
}

/// Clamps to `[0, 1]`, recording a warning when the value moved.
fn unit(value: f64, what: &str, warnings: &mut Vec<String>) -> f64 {
    let clamped = value.clamp(0.0, 1.0);
    if clamped != value {
        warnings.push(format!("{what} {value} clamped to {clamped}"));
    }
    clamped
}

fn padded(s: &str) -> String {
    format!(" {} ", canonical_attribute(s))
}

/// Maps a model-supplied variable name to an action by normalized match:
/// exact first, then unique whole-word containment in either direction.
pub fn align_variable(variable: &str, actions: &[String]) -> Result<usize, StageError> {
    let v = canonical_attribute(variable);
    let normalized: Vec<String> = actions.iter().map(|a| canonical_attribute(a)).collect();
    if let Some(i) = normalized.iter().position(|a| *a == v) {
        return Ok(i);
    }
    let hits: Vec<usize> = if v.is_empty() {
        Vec::new()
    } else {
        let pv = padded(variable);
        actions
            .iter()
            .enumerate()
            .filter(|(_, a)| {
                let pa = padded(a);
                pa.contains(&pv) || pv.contains(&pa)
            })
            .map(|(i, _)| i)
            .collect()
    };
    match hits.as_slice() {
        [only] => Ok(*only),
        _ => Err(StageError::Alignment {
            variable: variable.to_string(),
            candidates: actions.to_vec(),
        }),
    }
}

fn mentions_label(statement: &str, labels: &[String]) -> bool {
    let s = padded(statement);
    labels.iter().any(|label| {
        let l = canonical_attribute(label);
        s.contains(&format!(" {l} "))
            || l.split(' ')
                .filter(|w| w.len() >= 4)
                .any(|w| s.contains(&format!(" {w} ")))
    })
}

pub fn parse_extraction(text: &str, labels: &[String]) -> Result<StageOutput<Extraction>, StageError> {
    let mut obj = Object::parse(text)?;
    let Some(value) = field(&obj.map, "information") else {
        return Err(StageError::Schema("missing `information`".into()));
    };
    let Value::Array(items) = value else {
        return Err(StageError::Schema("`information` is not an array".into()));
    };
    let mut statements = Vec::new();
    let mut warnings = Vec::new();
    for (k, item) in items.iter().enumerate() {
        let Value::String(s) = item else {
            return Err(StageError::Schema(format!("information[{k}] is not a string")));
        };
        let s = s.trim();
        if s.is_empty() {
            warnings.push(format!("information[{k}] is empty and was dropped"));
            continue;
        }
        if !mentions_label(s, labels) {
            warnings.push(format!("information[{k}] names no variable: {s}"));
        }
        statements.push(s.to_string());
    }
    let degenerate = statements.is_empty();
    if degenerate {
        warnings.push("no information extracted".into());
    }
    obj.warnings.extend(warnings);
    Ok(obj.finish(Extraction {
        statements,
        degenerate,
    }))
}

fn attribute_entries(value: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let push_object = |map: &Map<String, Value>, out: &mut Vec<(String, String)>| {
        match (field(map, "Attribute"), field(map, "Value")) {
            (Some(Value::String(name)), Some(v)) if map.len() == 2 => {
                out.push((name.trim().to_string(), text_of(v)));
            }
            _ => {
                for (k, v) in map {
                    out.push((k.trim().to_string(), text_of(v)));
                }
            }
        }
    };
    match value {
        Value::Array(items) => {
            for item in items {
                match item {
                    Value::Object(map) => push_object(map, &mut out),
                    Value::String(s) => out.push(match s.split_once(':') {
                        Some((name, v)) => (name.trim().to_string(), v.trim().to_string()),
                        None => (s.trim().to_string(), s.trim().to_string()),
                    }),
                    _ => {}
                }
            }
        }
        Value::Object(map) => push_object(map, &mut out),
        Value::String(s) => {
            for part in s.split(&[';', '\n'][..]) {
                if let Some((name, v)) = part.split_once(':') {
                    out.push((name.trim().to_string(), v.trim().to_string()));
                }
            }
        }
        _ => {}
    }
    out.retain(|(name, _)| !canonical_attribute(name).is_empty());
    out
}

/// Builds the verbal table. Attribute order is first appearance; names that
/// collide after canonicalization are merged.
pub fn parse_attribute_table(
    text: &str,
    actions: &[String],
) -> Result<StageOutput<AttributeTable>, StageError> {
    let mut obj = Object::parse(text)?;
    let Some(Value::Array(variables)) = field(&obj.map, "Variable") else {
        return Err(StageError::Schema("`Variable` must be an array".into()));
    };
    let n = actions.len();
    let mut names: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut values: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    let mut warnings = Vec::new();
    for (k, entry) in variables.iter().enumerate() {
        let Value::Object(map) = entry else {
            return Err(StageError::Schema(format!("Variable[{k}] is not an object")));
        };
        let Some(Value::String(name)) = field(map, "Variable") else {
            return Err(StageError::Schema(format!("Variable[{k}] has no name")));
        };
        let row = align_variable(name, actions)?;
        let attrs = field(map, "Attribute").map(attribute_entries).unwrap_or_default();
        if attrs.is_empty() {
            warnings.push(format!("variable `{name}` has no attributes"));
        }
        for (attr, value) in attrs {
            let key = canonical_attribute(&attr);
            let col = *index.entry(key).or_insert_with(|| {
                names.push(attr.clone());
                names.len() - 1
            });
            values.entry((row, col)).or_default().push(value);
        }
    }
    let m = names.len();
    let mut cells = vec![vec![RelevanceCell::not_mentioned(); m]; n];
    for ((i, j), vs) in values {
        let joined = vs
            .into_iter()
            .filter(|v| !v.is_empty())
            .collect::<Vec<_>>()
            .join("; ");
        if !joined.is_empty() {
            cells[i][j] = RelevanceCell::verbal(joined);
        }
    }
    for (i, action) in actions.iter().enumerate() {
        if cells[i].iter().all(|c| !c.is_mentioned()) && m > 0 {
            warnings.push(format!("action `{action}` has no attribute values"));
        }
    }
    let table = AttributeTable::new(n, names, cells)
        .map_err(|e| StageError::Schema(e.to_string()))?;
    obj.warnings.extend(warnings);
    Ok(obj.finish(table))
}

fn judgement(map: &Map<String, Value>, warnings: &mut Vec<String>) -> Result<WeightJudgement, StageError> {
    let raw = field(map, "Weight").ok_or_else(|| StageError::Schema("missing `Weight`".into()))?;
    let weight = number_of(raw)
        .ok_or_else(|| StageError::Schema(format!("non-numeric weight {raw}")))?;
    if matches!(raw, Value::String(_)) {
        warnings.push(format!("weight string {raw} coerced to {weight}"));
    }
    let explanation = field(map, "Explanation").map(text_of).unwrap_or_default();
    Ok(WeightJudgement {
        explanation,
        weight: unit(weight, "weight", warnings),
    })
}

pub fn parse_weight(text: &str) -> Result<StageOutput<WeightJudgement>, StageError> {
    let mut obj = Object::parse(text)?;
    let mut warnings = Vec::new();
    let parsed = judgement(&obj.map, &mut warnings)?;
    obj.warnings.extend(warnings);
    Ok(obj.finish(parsed))
}

/// Batched weighing: one judgement per requested `(action, attribute)` pair,
/// in request order.
pub fn parse_weight_batch(
    text: &str,
    actions: &[String],
    table: &AttributeTable,
    pairs: &[(usize, usize)],
) -> Result<StageOutput<Vec<WeightJudgement>>, StageError> {
    let mut obj = Object::parse(text)?;
    let Some(Value::Array(items)) = field(&obj.map, "Weights") else {
        return Err(StageError::Schema("`Weights` must be an array".into()));
    };
    let mut found: BTreeMap<(usize, usize), WeightJudgement> = BTreeMap::new();
    let mut warnings = Vec::new();
    for item in items {
        let Value::Object(map) = item else {
            return Err(StageError::Schema("weight entry is not an object".into()));
        };
        let (row, col) = locate(map, actions, table, &mut warnings)?;
        let Some(col) = col else { continue };
        found.insert((row, col), judgement(map, &mut warnings)?);
    }
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, j) in pairs {
        let j_out = found.remove(&(i, j)).ok_or_else(|| StageError::Completeness {
            variable: actions[i].clone(),
            attribute: table.attributes()[j].clone(),
        })?;
        out.push(j_out);
    }
    obj.warnings.extend(warnings);
    Ok(obj.finish(out))
}

/// Resolves the `Variable`/`Attribute` fields of a per-cell entry. Unknown
/// attributes are ignored with a warning.
fn locate(
    map: &Map<String, Value>,
    actions: &[String],
    table: &AttributeTable,
    warnings: &mut Vec<String>,
) -> Result<(usize, Option<usize>), StageError> {
    let Some(Value::String(var)) = field(map, "Variable") else {
        return Err(StageError::Schema("entry has no `Variable`".into()));
    };
    let Some(Value::String(attr)) = field(map, "Attribute") else {
        return Err(StageError::Schema("entry has no `Attribute`".into()));
    };
    let row = align_variable(var, actions)?;
    Ok((row, attribute_column(attr, table, warnings)))
}

fn attribute_column(attr: &str, table: &AttributeTable, warnings: &mut Vec<String>) -> Option<usize> {
    let key = canonical_attribute(attr);
    let col = table
        .attributes()
        .iter()
        .position(|a| canonical_attribute(a) == key);
    if col.is_none() {
        warnings.push(format!("ignored unknown attribute `{attr}`"));
    }
    col
}

fn integer_tokens(s: &str) -> Vec<i64> {
    let mut out = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, out: &mut Vec<i64>| {
        if let Ok(v) = current.parse::<i64>() {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        current.clear();
    };
    for c in s.chars() {
        if c.is_ascii_digit() {
            current.push(c);
        } else {
            flush(&mut current, &mut out);
        }
    }
    flush(&mut current, &mut out);
    out
}

fn answer_number(v: &Value) -> Result<i64, StageError> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .or_else(|| n.as_f64().filter(|x| x.fract() == 0.0 && x.abs() < 1e15).map(|x| x as i64))
            .ok_or_else(|| StageError::Schema(format!("answer {n} is not an integer"))),
        Value::String(s) => match integer_tokens(s).as_slice() {
            [one] => Ok(*one),
            [] => Err(StageError::Schema(format!("answer `{s}` contains no index"))),
            _ => Err(StageError::Schema(format!("answer `{s}` is ambiguous"))),
        },
        other => Err(StageError::Schema(format!("answer {other} is not an index"))),
    }
}

/// Reads `Answer` in the problem's visible numbering and returns a 0-based index.
pub fn parse_decision(
    text: &str,
    n: usize,
    indexing: ChoiceIndexing,
) -> Result<StageOutput<Decision>, StageError> {
    let obj = Object::parse(text)?;
    let raw = field(&obj.map, "Answer").ok_or_else(|| StageError::Schema("missing `Answer`".into()))?;
    let shown = answer_number(raw)?;
    let answer = normalize_answer(shown, n, indexing)?;
    let reasoning = field(&obj.map, "Reasoning").map(text_of).unwrap_or_default();
    Ok(obj.finish(Decision { reasoning, answer }))
}

pub fn normalize_answer(shown: i64, n: usize, indexing: ChoiceIndexing) -> Result<usize, StageError> {
    let offset = indexing.offset() as i64;
    let index = shown - offset;
    if index < 0 || index >= n as i64 {
        return Err(StageError::Range { answer: shown, n });
    }
    Ok(index as usize)
}

/// Scores for every cell with a nonzero sparsified weight. Unmentioned cells
/// are 0 whatever the model says; cells outside the filter are never read.
pub fn ground_relevance(
    text: &str,
    actions: &[String],
    table: &AttributeTable,
    w_prime: &WeightMatrix,
) -> Result<StageOutput<Grounding>, StageError> {
    let mut obj = Object::parse(text)?;
    let mut warnings = Vec::new();
    let mut scores: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut record = |row: usize, col: usize, v: &Value, warnings: &mut Vec<String>| {
        let x = number_of(v).ok_or_else(|| StageError::Schema(format!("non-numeric score {v}")))?;
        let what = format!("score for ({}, {})", actions[row], table.attributes()[col]);
        scores.insert((row, col), unit(x, &what, warnings));
        Ok::<_, StageError>(())
    };
    match field(&obj.map, "Scores") {
        Some(Value::Array(items)) => {
            for item in items {
                let Value::Object(map) = item else {
                    return Err(StageError::Schema("score entry is not an object".into()));
                };
                let (row, col) = locate(map, actions, table, &mut warnings)?;
                let score = field(map, "Score")
                    .ok_or_else(|| StageError::Schema("score entry has no `Score`".into()))?;
                if let Some(col) = col {
                    record(row, col, score, &mut warnings)?;
                }
            }
        }
        Some(Value::Object(by_var)) => {
            for (var, attrs) in by_var {
                let row = align_variable(var, actions)?;
                let Value::Object(attrs) = attrs else {
                    return Err(StageError::Schema(format!("scores for `{var}` are not an object")));
                };
                for (attr, score) in attrs {
                    if let Some(col) = attribute_column(attr, table, &mut warnings) {
                        record(row, col, score, &mut warnings)?;
                    }
                }
            }
        }
        _ => return Err(StageError::Schema("`Scores` must be an array or object".into())),
    }
    let (n, m) = (table.n(), table.m());
    let mut grid = Grid::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            if w_prime.grid().get(i, j) == 0.0 || !table.cell(i, j).is_mentioned() {
                continue;
            }
            let v = scores.get(&(i, j)).ok_or_else(|| StageError::Completeness {
                variable: actions[i].clone(),
                attribute: table.attributes()[j].clone(),
            })?;
            grid.set(i, j, *v);
        }
    }
    let reasoning = field(&obj.map, "Reasoning").map(text_of).unwrap_or_default();
    let model_answer = field(&obj.map, "Answer").cloned();
    obj.warnings.extend(warnings);
    Ok(obj.finish(Grounding {
        scores: grid,
        reasoning,
        model_answer,
    }))
}

pub fn parse_rationale(text: &str) -> Result<StageOutput<String>, StageError> {
    let obj = Object::parse(text)?;
    let rationale = field(&obj.map, "Rationale")
        .map(text_of)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| StageError::Schema("missing or empty `Rationale`".into()))?;
    Ok(obj.finish(rationale))
}
