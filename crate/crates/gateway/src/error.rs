use std::path::PathBuf;

use decisionflow_core::Stage;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("transcript store I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt transcript {path}: {message}")]
    Corrupt { path: PathBuf, message: String },
    #[error("transcript {path} is filed under {filed} but its request digests to {computed}")]
    DigestMismatch {
        path: PathBuf,
        filed: String,
        computed: String,
    },
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("backend rejected the request (status {status:?}): {payload}")]
    Backend { status: Option<u16>, payload: String },
    #[error("replay miss for {stage} request {digest}")]
    ReplayMiss { digest: String, stage: Stage },
    #[error("gateway has no live backend configured")]
    NoBackend,
    #[error(transparent)]
    Store(#[from] StoreError),
}
