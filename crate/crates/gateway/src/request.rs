use decisionflow_core::{Stage, Usage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_MAX_TOKENS: u32 = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stage: Stage,
    /// Distinguishes repeated stochastic samples of the same prompt.
    #[serde(default)]
    pub attempt: u32,
}

impl CompletionRequest {
    pub fn new(stage: Stage, model: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            model: model.into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            stage,
            attempt: 0,
        }
    }

    pub fn temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn max_tokens(mut self, max_tokens: u32) -> Self {
        self.max_tokens = max_tokens;
        self
    }

    pub fn attempt(mut self, attempt: u32) -> Self {
        self.attempt = attempt;
        self
    }

    pub fn validate(&self, ceiling: u32) -> Result<(), String> {
        if self.prompt.trim().is_empty() {
            return Err("prompt is empty".into());
        }
        if self.model.trim().is_empty() {
            return Err("model is empty".into());
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(format!("temperature {} must be finite and >= 0", self.temperature));
        }
        if self.max_tokens == 0 || self.max_tokens > ceiling {
            return Err(format!("max_tokens {} outside 1..={ceiling}", self.max_tokens));
        }
        Ok(())
    }

    pub fn cache_key(&self) -> CacheKey {
        CacheKey::of(self)
    }
}

/// SHA-256 over the canonical JSON of `(model, temperature, max_tokens,
/// prompt, attempt)`. The stage tag is audit metadata and not part of the key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CacheKey(String);

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a str,
    temperature: f64,
    max_tokens: u32,
    prompt: &'a str,
    attempt: u32,
}

impl CacheKey {
    pub fn of(request: &CompletionRequest) -> Self {
        let material = KeyMaterial {
            model: &request.model,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
            prompt: &request.prompt,
            attempt: request.attempt,
        };
        let bytes = serde_json::to_vec(&material).expect("key material serializes");
        Self(hex::encode(Sha256::digest(&bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Two-character shard directory name.
    pub fn shard(&self) -> &str {
        &self.0[..2]
    }
}

impl std::fmt::Display for CacheKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
    pub latency_secs: f64,
    pub cache_hit: bool,
    pub digest: CacheKey,
    /// Backend invocations spent on this completion; 0 for cache hits.
    pub transport_attempts: u32,
}

/// Whitespace-delimited token approximation used when the backend reports
/// no usage.
pub fn count_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}
