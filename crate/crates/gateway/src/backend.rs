use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use crate::request::CompletionRequest;
use crate::{API_KEY_ENV, BASE_URL_ENV};

#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply {
    pub text: String,
    /// `(prompt_tokens, response_tokens)` when the backend reports usage.
    pub usage: Option<(u64, u64)>,
    /// Round-trip time measured by the backend, excluding response parsing.
    pub latency: Option<Duration>,
}

impl BackendReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            usage: None,
            latency: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendFailure {
    /// Connection-level failure; retried.
    Transport(String),
    /// Non-success HTTP status; retried only for 429 and 5xx.
    Status { status: u16, body: String },
    /// The model declined or the payload was unusable; never retried.
    Refusal { payload: String },
}

impl BackendFailure {
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Transport(_) => true,
            Self::Status { status, .. } => *status == 429 || (500..600).contains(status),
            Self::Refusal { .. } => false,
        }
    }
}

pub trait Backend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, BackendFailure>;
}

/// OpenAI-style `chat/completions` endpoint.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl HttpBackend {
    pub const DEFAULT_PATH: &'static str = "/v1/chat/completions";

    pub fn new(base_url: &str, path: &str, api_key: Option<String>, timeout: Duration) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client builds");
        let endpoint = format!(
            "{}/{}",
            base_url.trim_end_matches('/'),
            path.trim_start_matches('/')
        );
        Self {
            client,
            endpoint,
            api_key,
        }
    }

    /// Reads `DECISIONFLOW_BASE_URL` and `DECISIONFLOW_API_KEY`.
    pub fn from_env(path: Option<&str>, timeout: Duration) -> Option<Self> {
        let base = std::env::var(BASE_URL_ENV).ok()?;
        let key = std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty());
        Some(Self::new(&base, path.unwrap_or(Self::DEFAULT_PATH), key, timeout))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }
}

impl Backend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, BackendFailure> {
        let body = json!({
            "model": request.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut builder = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let started = Instant::now();
        let response = builder
            .send()
            .map_err(|e| BackendFailure::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .text()
            .map_err(|e| BackendFailure::Transport(e.to_string()))?;
        let latency = started.elapsed();
        if !(200..300).contains(&status) {
            return Err(BackendFailure::Status { status, body: text });
        }
        parse_chat_response(&text).map(|mut reply| {
            reply.latency = Some(latency);
            reply
        })
    }
}

/// Reads `choices[0].message.content` (or legacy `choices[0].text`) and the
/// `usage` block.
pub(crate) fn parse_chat_response(body: &str) -> Result<BackendReply, BackendFailure> {
    let refusal = || BackendFailure::Refusal {
        payload: body.to_string(),
    };
    let value: Value = serde_json::from_str(body).map_err(|_| refusal())?;
    let choice = value.get("choices").and_then(|c| c.get(0)).ok_or_else(refusal)?;
    let message = choice.get("message");
    if message
        .and_then(|m| m.get("refusal"))
        .is_some_and(|r| !r.is_null())
    {
        return Err(refusal());
    }
    let text = message
        .and_then(|m| m.get("content"))
        .or_else(|| choice.get("text"))
        .and_then(Value::as_str)
        .ok_or_else(refusal)?;
    let usage = value.get("usage").and_then(|u| {
        let prompt = u.get("prompt_tokens")?.as_u64()?;
        let response = u.get("completion_tokens")?.as_u64()?;
        Some((prompt, response))
    });
    Ok(BackendReply {
        text: text.to_string(),
        usage,
        latency: None,
    })
}

type Script = dyn Fn(&CompletionRequest) -> Result<BackendReply, BackendFailure> + Send + Sync;

/// In-process backend driven by a closure. Used to record fixture corpora and
/// to inject faults in tests.
pub struct ScriptedBackend {
    script: Box<Script>,
    calls: AtomicUsize,
}

impl ScriptedBackend {
    pub fn new(
        script: impl Fn(&CompletionRequest) -> Result<BackendReply, BackendFailure> + Send + Sync + 'static,
    ) -> Self {
        Self {
            script: Box::new(script),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<BackendReply, BackendFailure> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        (self.script)(request)
    }
}
