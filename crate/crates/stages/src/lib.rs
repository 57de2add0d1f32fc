//! Prompt templates for each pipeline stage and the parsers that turn raw
//! completions back into typed artifacts.
//!
//! Every template is a plain-text file with `{placeholder}` slots. Every
//! parser first locates a JSON object in the completion (see
//! [`extract_json_block`]) and then validates it against its stage schema,
//! returning either a complete [`StageOutput`] or a classified [`StageError`].
//!
//! | template | schema |
//! |---|---|
//! | extract_info | `extraction.v1` |
//! | summarize_attributes | `attribute_table.v1` |
//! | weigh | `weight.v1` |
//! | weigh_batch | `weight_batch.v1` |
//! | ground_and_decide | `grounding.v1` |
//! | rationale | `rationale.v1` |
//! | zero_shot, cot, joint | `decision.v1` |

pub mod corpus;
pub mod error;
pub mod json;
pub mod parse;
pub mod prompt;
pub mod template;

pub use error::{StageError, TemplateError};
pub use json::{extract_json_block, JsonBlock, Repair};
pub use parse::{
    align_variable, ground_relevance, normalize_answer, parse_attribute_table, parse_decision,
    parse_extraction, parse_rationale, parse_weight, parse_weight_batch, Decision, Extraction,
    Grounding, StageOutput, WeightJudgement,
};
pub use prompt::{render_stage_prompt, DecisionSummary, PromptContext};
pub use template::{SchemaId, StageTemplate, TemplateId, TemplateSet};
