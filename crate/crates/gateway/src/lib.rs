//! Uniform text-completion contract over an HTTP backend, with bounded
//! retries, usage and latency capture, and a content-addressed transcript
//! store that makes runs replayable offline.

mod backend;
mod error;
mod gateway;
mod request;
mod store;

pub use backend::{Backend, BackendFailure, BackendReply, HttpBackend, ScriptedBackend};
pub use error::{GatewayError, StoreError};
pub use gateway::{Gateway, GatewayConfig, GatewayStats, RetryPolicy, TranscriptMode};
pub use request::{count_tokens, CacheKey, Completion, CompletionRequest, DEFAULT_MAX_TOKENS};
pub use store::{Transcript, TranscriptRequest, TranscriptResponse, TranscriptStore};

pub const API_KEY_ENV: &str = "DECISIONFLOW_API_KEY";
pub const BASE_URL_ENV: &str = "DECISIONFLOW_BASE_URL";
