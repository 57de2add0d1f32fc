use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("template `{template}` references placeholder `{{{name}}}` with no value supplied")]
    MissingPlaceholder { template: String, name: String },
    #[error("reading template {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Classified failure of a stage parser.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StageError {
    #[error("no recoverable JSON object: {message}")]
    Parse { message: String, raw: String },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("variable `{variable}` matches no single action; candidates: {candidates:?}")]
    Alignment {
        variable: String,
        candidates: Vec<String>,
    },
    #[error("answer {answer} is outside the {n} available choices")]
    Range { answer: i64, n: usize },
    #[error("no score for surviving cell ({variable}, {attribute})")]
    Completeness { variable: String, attribute: String },
}

impl StageError {
    /// Short class name used in traces and abstention reasons.
    pub fn class(&self) -> &'static str {
        match self {
            Self::Parse { .. } => "parse",
            Self::Schema(_) => "schema",
            Self::Alignment { .. } => "alignment",
            Self::Range { .. } => "range",
            Self::Completeness { .. } => "completeness",
        }
    }
}
