use thiserror::Error;

/// Errors that abort a command with exit status 1.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Dataset(#[from] decisionflow_pipeline::DatasetError),
    #[error("{0}")]
    Problem(String),
    #[error(transparent)]
    Store(#[from] decisionflow_gateway::StoreError),
    #[error("no live backend: set {} (and optionally {})", decisionflow_gateway::BASE_URL_ENV, decisionflow_gateway::API_KEY_ENV)]
    NoBackend,
    #[error(transparent)]
    Template(#[from] decisionflow_stages::TemplateError),
    #[error(transparent)]
    Eval(#[from] decisionflow_eval::EvalError),
    #[error("{problem} repeat {repeat}: {message}")]
    FatalRun {
        problem: String,
        repeat: u32,
        message: String,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    /// Every run answered.
    Ok = 0,
    /// A fatal error aborted the command.
    Fatal = 1,
    /// At least one run abstained.
    Partial = 2,
}
