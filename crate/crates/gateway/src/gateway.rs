use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use decisionflow_core::Usage;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendFailure};
use crate::error::GatewayError;
use crate::request::{count_tokens, Completion, CompletionRequest, DEFAULT_MAX_TOKENS};
use crate::store::{Transcript, TranscriptResponse, TranscriptStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranscriptMode {
    /// Call the backend, persist nothing.
    Live,
    /// Serve recorded entries, call the backend and persist on a miss.
    Record,
    /// Serve recorded entries only.
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_delay: Duration::from_millis(500),
        }
    }
}

impl RetryPolicy {
    fn delay_before(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt.saturating_sub(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayConfig {
    pub max_tokens_ceiling: u32,
    pub retry: RetryPolicy,
    pub max_in_flight: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            max_tokens_ceiling: DEFAULT_MAX_TOKENS,
            retry: RetryPolicy::default(),
            max_in_flight: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayStats {
    /// Calls to [`Gateway::complete`].
    pub requests: usize,
    pub cache_hits: usize,
    /// Backend invocations, retries included.
    pub network_calls: usize,
}

#[derive(Default)]
struct Counters {
    requests: AtomicUsize,
    cache_hits: AtomicUsize,
    network_calls: AtomicUsize,
}

struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(max: usize) -> Self {
        Self {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            max: max.max(1),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().expect("limiter lock");
        while *n >= self.max {
            n = self.freed.wait(n).expect("limiter lock");
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().expect("limiter lock") -= 1;
        self.0.freed.notify_one();
    }
}

/// Shareable completion gateway. All methods take `&self`.
pub struct Gateway {
    mode: TranscriptMode,
    backend: Option<Arc<dyn Backend>>,
    store: Option<TranscriptStore>,
    config: GatewayConfig,
    limiter: Limiter,
    counters: Counters,
}

impl Gateway {
    pub fn live(backend: Arc<dyn Backend>, config: GatewayConfig) -> Self {
        Self::build(TranscriptMode::Live, Some(backend), None, config)
    }

    pub fn record(backend: Arc<dyn Backend>, store: TranscriptStore, config: GatewayConfig) -> Self {
        Self::build(TranscriptMode::Record, Some(backend), Some(store), config)
    }

    pub fn replay(store: TranscriptStore, config: GatewayConfig) -> Self {
        Self::build(TranscriptMode::Replay, None, Some(store), config)
    }

    fn build(
        mode: TranscriptMode,
        backend: Option<Arc<dyn Backend>>,
        store: Option<TranscriptStore>,
        config: GatewayConfig,
    ) -> Self {
        Self {
            mode,
            backend,
            store,
            limiter: Limiter::new(config.max_in_flight),
            config,
            counters: Counters::default(),
        }
    }

    pub fn mode(&self) -> TranscriptMode {
        self.mode
    }

    pub fn store(&self) -> Option<&TranscriptStore> {
        self.store.as_ref()
    }

    pub fn stats(&self) -> GatewayStats {
        GatewayStats {
            requests: self.counters.requests.load(Ordering::SeqCst),
            cache_hits: self.counters.cache_hits.load(Ordering::SeqCst),
            network_calls: self.counters.network_calls.load(Ordering::SeqCst),
        }
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        self.counters.requests.fetch_add(1, Ordering::SeqCst);
        request
            .validate(self.config.max_tokens_ceiling)
            .map_err(GatewayError::InvalidRequest)?;
        let key = request.cache_key();

        if let Some(store) = &self.store {
            if let Some(entry) = store.get(&key) {
                self.counters.cache_hits.fetch_add(1, Ordering::SeqCst);
                return Ok(entry.to_completion());
            }
        }

        match self.mode {
            TranscriptMode::Replay => Err(GatewayError::ReplayMiss {
                digest: key.to_string(),
                stage: request.stage,
            }),
            TranscriptMode::Live | TranscriptMode::Record => {
                let completion = self.call_backend(request)?;
                if let (TranscriptMode::Record, Some(store)) = (self.mode, &self.store) {
                    store.put(Transcript::new(
                        request,
                        TranscriptResponse {
                            text: completion.text.clone(),
                            usage: completion.usage,
                            latency_secs: completion.latency_secs,
                        },
                    ))?;
                }
                Ok(completion)
            }
        }
    }

    fn call_backend(&self, request: &CompletionRequest) -> Result<Completion, GatewayError> {
        let backend = self.backend.as_ref().ok_or(GatewayError::NoBackend)?;
        let _permit = self.limiter.acquire();
        let retry = self.config.retry;
        let mut attempt = 0;
        loop {
            attempt += 1;
            self.counters.network_calls.fetch_add(1, Ordering::SeqCst);
            let started = Instant::now();
            let outcome = backend.complete(request);
            let measured = started.elapsed();
            match outcome {
                Ok(reply) => {
                    let usage = match reply.usage {
                        Some((prompt_tokens, response_tokens)) => Usage {
                            prompt_tokens,
                            response_tokens,
                            approximate: false,
                        },
                        None => Usage {
                            prompt_tokens: count_tokens(&request.prompt),
                            response_tokens: count_tokens(&reply.text),
                            approximate: true,
                        },
                    };
                    return Ok(Completion {
                        latency_secs: reply.latency.unwrap_or(measured).as_secs_f64(),
                        text: reply.text,
                        usage,
                        cache_hit: false,
                        digest: request.cache_key(),
                        transport_attempts: attempt,
                    });
                }
                Err(failure) if failure.is_retryable() && attempt < retry.max_attempts => {
                    log::warn!(
                        "{} request attempt {attempt} failed, retrying: {failure:?}",
                        request.stage
                    );
                    std::thread::sleep(retry.delay_before(attempt));
                }
                Err(BackendFailure::Transport(message)) => {
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        message,
                    })
                }
                Err(BackendFailure::Status { status, body }) if status == 429 || status >= 500 => {
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        message: format!("HTTP {status}: {body}"),
                    })
                }
                Err(BackendFailure::Status { status, body }) => {
                    return Err(GatewayError::Backend {
                        status: Some(status),
                        payload: body,
                    })
                }
                Err(BackendFailure::Refusal { payload }) => {
                    return Err(GatewayError::Backend {
                        status: None,
                        payload,
                    })
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{BackendReply, ScriptedBackend};
    use decisionflow_core::Stage;

    fn quick() -> GatewayConfig {
        GatewayConfig {
            retry: RetryPolicy {
                max_attempts: 3,
                base_delay: Duration::ZERO,
            },
            ..GatewayConfig::default()
        }
    }

    fn req(prompt: &str) -> CompletionRequest {
        CompletionRequest::new(Stage::ZeroShot, "m", prompt)
    }

    #[test]
    fn backoff_doubles() {
        let p = RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_millis(100),
        };
        assert_eq!(p.delay_before(1), Duration::from_millis(100));
        assert_eq!(p.delay_before(2), Duration::from_millis(200));
    }

    #[test]
    fn transient_failures_are_retried_within_budget() {
        let backend = Arc::new(ScriptedBackend::new({
            let n = AtomicUsize::new(0);
            move |_| {
                if n.fetch_add(1, Ordering::SeqCst) < 2 {
                    Err(BackendFailure::Status { status: 503, body: "busy".into() })
                } else {
                    Ok(BackendReply::text("ok"))
                }
            }
        }));
        let gw = Gateway::live(backend.clone(), quick());
        let c = gw.complete(&req("p")).unwrap();
        assert_eq!(c.text, "ok");
        assert_eq!(c.transport_attempts, 3);
        assert_eq!(backend.calls(), 3);
    }

    #[test]
    fn retry_budget_is_bounded() {
        let backend = Arc::new(ScriptedBackend::new(|_| Err(BackendFailure::Transport("down".into()))));
        let gw = Gateway::live(backend.clone(), quick());
        let err = gw.complete(&req("p")).unwrap_err();
        assert!(matches!(err, GatewayError::Transport { attempts: 3, .. }));
        assert_eq!(backend.calls(), 3);
        assert_eq!(gw.stats().network_calls, 3);
    }

    #[test]
    fn refusals_are_not_retried() {
        let backend = Arc::new(ScriptedBackend::new(|_| {
            Err(BackendFailure::Refusal { payload: "{\"refusal\":\"no\"}".into() })
        }));
        let gw = Gateway::live(backend.clone(), quick());
        let err = gw.complete(&req("p")).unwrap_err();
        assert!(matches!(err, GatewayError::Backend { status: None, ref payload } if payload.contains("refusal")));
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn client_errors_are_backend_errors() {
        let backend = Arc::new(ScriptedBackend::new(|_| {
            Err(BackendFailure::Status { status: 401, body: "unauthorized".into() })
        }));
        let gw = Gateway::live(backend.clone(), quick());
        assert!(matches!(
            gw.complete(&req("p")).unwrap_err(),
            GatewayError::Backend { status: Some(401), .. }
        ));
        assert_eq!(backend.calls(), 1);
    }

    #[test]
    fn missing_usage_falls_back_to_whitespace_count() {
        let backend = Arc::new(ScriptedBackend::new(|_| Ok(BackendReply::text("one two three"))));
        let gw = Gateway::live(backend, quick());
        let c = gw.complete(&req("a b")).unwrap();
        assert_eq!(c.usage, Usage { prompt_tokens: 2, response_tokens: 3, approximate: true });
    }

    #[test]
    fn invalid_requests_never_reach_the_backend() {
        let backend = Arc::new(ScriptedBackend::new(|_| Ok(BackendReply::text("x"))));
        let gw = Gateway::live(backend.clone(), quick());
        assert!(matches!(
            gw.complete(&req("p").max_tokens(9000)),
            Err(GatewayError::InvalidRequest(_))
        ));
        assert_eq!(backend.calls(), 0);
    }

    #[test]
    fn in_flight_requests_are_bounded() {
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let backend = Arc::new(ScriptedBackend::new({
            let (live, peak) = (live.clone(), peak.clone());
            move |_| {
                let now = live.fetch_add(1, Ordering::SeqCst) + 1;
                peak.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(Duration::from_millis(5));
                live.fetch_sub(1, Ordering::SeqCst);
                Ok(BackendReply::text("x"))
            }
        }));
        let gw = Gateway::live(backend, GatewayConfig { max_in_flight: 2, ..quick() });
        std::thread::scope(|s| {
            for i in 0..8 {
                let gw = &gw;
                s.spawn(move || gw.complete(&req(&format!("p{i}"))).unwrap());
            }
        });
        assert!(peak.load(Ordering::SeqCst) <= 2);
    }
}
