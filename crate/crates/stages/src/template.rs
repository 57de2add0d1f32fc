use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use decisionflow_core::Stage;
use serde::{Deserialize, Serialize};

use crate::error::TemplateError;

/// Identifier of the parser that understands a template's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SchemaId {
    #[serde(rename = "extraction.v1")]
    Extraction,
    #[serde(rename = "attribute_table.v1")]
    AttributeTable,
    #[serde(rename = "weight.v1")]
    Weight,
    #[serde(rename = "weight_batch.v1")]
    WeightBatch,
    #[serde(rename = "grounding.v1")]
    Grounding,
    #[serde(rename = "rationale.v1")]
    Rationale,
    #[serde(rename = "decision.v1")]
    Decision,
}

impl SchemaId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Extraction => "extraction.v1",
            Self::AttributeTable => "attribute_table.v1",
            Self::Weight => "weight.v1",
            Self::WeightBatch => "weight_batch.v1",
            Self::Grounding => "grounding.v1",
            Self::Rationale => "rationale.v1",
            Self::Decision => "decision.v1",
        }
    }
}

impl fmt::Display for SchemaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One template file. `WeighBatch` is the batched variant of the weigh stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    ExtractInfo,
    SummarizeAttributes,
    Weigh,
    WeighBatch,
    GroundAndDecide,
    Rationale,
    ZeroShot,
    Cot,
    Joint,
}

impl TemplateId {
    pub const ALL: [TemplateId; 9] = [
        Self::ExtractInfo,
        Self::SummarizeAttributes,
        Self::Weigh,
        Self::WeighBatch,
        Self::GroundAndDecide,
        Self::Rationale,
        Self::ZeroShot,
        Self::Cot,
        Self::Joint,
    ];

    /// File stem in a template directory.
    pub fn name(self) -> &'static str {
        match self {
            Self::ExtractInfo => "extract_info",
            Self::SummarizeAttributes => "summarize_attributes",
            Self::Weigh => "weigh",
            Self::WeighBatch => "weigh_batch",
            Self::GroundAndDecide => "ground_and_decide",
            Self::Rationale => "rationale",
            Self::ZeroShot => "zero_shot",
            Self::Cot => "cot",
            Self::Joint => "joint",
        }
    }

    pub fn stage(self) -> Stage {
        match self {
            Self::ExtractInfo => Stage::ExtractInfo,
            Self::SummarizeAttributes => Stage::SummarizeAttributes,
            Self::Weigh | Self::WeighBatch => Stage::Weigh,
            Self::GroundAndDecide => Stage::GroundAndDecide,
            Self::Rationale => Stage::Rationale,
            Self::ZeroShot => Stage::ZeroShot,
            Self::Cot => Stage::Cot,
            Self::Joint => Stage::Joint,
        }
    }

    pub fn schema(self) -> SchemaId {
        match self {
            Self::ExtractInfo => SchemaId::Extraction,
            Self::SummarizeAttributes => SchemaId::AttributeTable,
            Self::Weigh => SchemaId::Weight,
            Self::WeighBatch => SchemaId::WeightBatch,
            Self::GroundAndDecide => SchemaId::Grounding,
            Self::Rationale => SchemaId::Rationale,
            Self::ZeroShot | Self::Cot | Self::Joint => SchemaId::Decision,
        }
    }

    fn builtin_body(self) -> &'static str {
        match self {
            Self::ExtractInfo => include_str!("../templates/extract_info.txt"),
            Self::SummarizeAttributes => include_str!("../templates/summarize_attributes.txt"),
            Self::Weigh => include_str!("../templates/weigh.txt"),
            Self::WeighBatch => include_str!("../templates/weigh_batch.txt"),
            Self::GroundAndDecide => include_str!("../templates/ground_and_decide.txt"),
            Self::Rationale => include_str!("../templates/rationale.txt"),
            Self::ZeroShot => include_str!("../templates/zero_shot.txt"),
            Self::Cot => include_str!("../templates/cot.txt"),
            Self::Joint => include_str!("../templates/joint.txt"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTemplate {
    pub id: TemplateId,
    pub stage: Stage,
    pub body: String,
    pub expected_schema: SchemaId,
}

impl StageTemplate {
    pub fn new(id: TemplateId, body: impl Into<String>) -> Self {
        Self {
            id,
            stage: id.stage(),
            body: body.into(),
            expected_schema: id.schema(),
        }
    }

    /// Names of every `{placeholder}` in the body.
    pub fn placeholders(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        scan(&self.body, |piece| {
            if let Piece::Placeholder(name) = piece {
                out.insert(name.to_string());
            }
        });
        out
    }

    /// Single-pass substitution; substituted text is never rescanned.
    pub fn render(&self, values: &BTreeMap<&str, String>) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.body.len() * 2);
        let mut missing = None;
        scan(&self.body, |piece| match piece {
            Piece::Literal(text) => out.push_str(text),
            Piece::Placeholder(name) => match values.get(name) {
                Some(v) => out.push_str(v),
                None => {
                    missing.get_or_insert_with(|| name.to_string());
                }
            },
        });
        match missing {
            Some(name) => Err(TemplateError::MissingPlaceholder {
                template: self.id.name().to_string(),
                name,
            }),
            None => Ok(out),
        }
    }
}

enum Piece<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

/// Splits `body` into literals and `{[a-z_]+}` placeholders. Any other brace
/// (JSON examples in the templates) is literal.
fn scan<'a>(body: &'a str, mut f: impl FnMut(Piece<'a>)) {
    let bytes = body.as_bytes();
    let mut literal_start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let mut j = i + 1;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || bytes[j] == b'_') {
                j += 1;
            }
            if j > i + 1 && j < bytes.len() && bytes[j] == b'}' {
                if literal_start < i {
                    f(Piece::Literal(&body[literal_start..i]));
                }
                f(Piece::Placeholder(&body[i + 1..j]));
                i = j + 1;
                literal_start = i;
                continue;
            }
        }
        i += 1;
    }
    if literal_start < bytes.len() {
        f(Piece::Literal(&body[literal_start..]));
    }
}

/// Immutable set of templates, one per [`TemplateId`].
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, StageTemplate>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let templates = TemplateId::ALL
            .iter()
            .map(|&id| (id, StageTemplate::new(id, id.builtin_body())))
            .collect();
        Self { templates }
    }

    /// Built-in templates with any `<name>.txt` found in `dir` taking precedence.
    pub fn with_overrides(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.name()));
            if !path.exists() {
                continue;
            }
            let body = std::fs::read_to_string(&path)
                .map_err(|source| TemplateError::Io { path, source })?;
            set.templates.insert(id, StageTemplate::new(id, body));
        }
        Ok(set)
    }

    pub fn get(&self, id: TemplateId) -> &StageTemplate {
        &self.templates[&id]
    }

    pub fn render(
        &self,
        id: TemplateId,
        values: &BTreeMap<&str, String>,
    ) -> Result<String, TemplateError> {
        self.get(id).render(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_braces_are_literal() {
        let t = StageTemplate::new(TemplateId::ZeroShot, "{a} {\"Answer\": 1} {} {B}");
        assert_eq!(t.placeholders().into_iter().collect::<Vec<_>>(), vec!["a"]);
        let values = BTreeMap::from([("a", "{b}".to_string())]);
        assert_eq!(t.render(&values).unwrap(), "{b} {\"Answer\": 1} {} {B}");
    }

    #[test]
    fn missing_placeholder_is_named() {
        let t = StageTemplate::new(TemplateId::Weigh, "x {attribute} {value}");
        let values = BTreeMap::from([("attribute", "a".to_string())]);
        let err = t.render(&values).unwrap_err();
        assert!(err.to_string().contains("{value}"), "{err}");
    }

    #[test]
    fn builtins_map_to_one_schema_each() {
        let set = TemplateSet::builtin();
        for id in TemplateId::ALL {
            let t = set.get(id);
            assert_eq!(t.expected_schema, id.schema());
            assert!(!t.placeholders().is_empty(), "{}", id.name());
        }
    }

    #[test]
    fn overrides_replace_only_present_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("cot.txt"), "custom {scenario}").unwrap();
        let set = TemplateSet::with_overrides(dir.path()).unwrap();
        assert_eq!(set.get(TemplateId::Cot).body, "custom {scenario}");
        assert_eq!(set.get(TemplateId::Joint), TemplateSet::builtin().get(TemplateId::Joint));
    }
}
