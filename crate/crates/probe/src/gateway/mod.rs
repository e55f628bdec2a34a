//! Chat and embedding access behind one retrying, rate-capped gateway that
//! keeps a ledger of every call.

mod embed;
mod fake;
mod http;

use std::collections::HashMap;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use probe_core::prompt::{render_messages, PromptError, PromptMessages};
use probe_core::{ProfileLabel, PromptContext, PromptKind, SamplingProfile};
use rand::Rng;
use serde::Serialize;

pub use embed::{hash_embedding, HASH_DIMENSION};
pub use fake::{FakeBackend, FakeScript, ScriptError};
pub use http::HttpBackend;

#[derive(Debug, Clone, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub kind: PromptKind,
    pub messages: PromptMessages,
    pub profile: SamplingProfile,
}

impl ChatRequest {
    /// System and user text joined, for matching and hashing.
    pub fn full_text(&self) -> String {
        match &self.messages.system {
            Some(s) => format!("{s}\n{}", self.messages.user),
            None => self.messages.user.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatReply {
    pub text: String,
    pub usage: Usage,
}

/// Failure reported by a backend for a single attempt.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("transient failure: {0}")]
    Transient(String),
    #[error("rejected (status {status:?}): {message}")]
    Rejected {
        status: Option<u16>,
        message: String,
    },
    #[error("empty response")]
    Empty,
}

impl BackendError {
    fn retryable(&self) -> bool {
        !matches!(self, BackendError::Rejected { .. })
    }
}

pub trait Backend: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatReply, BackendError>;
    fn embed(&self, model: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("transport-exhausted after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: BackendError },
    #[error("rejected by provider (status {status:?}): {message}")]
    Rejected {
        status: Option<u16>,
        message: String,
    },
    #[error("embedding dimension {found} differs from earlier {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("provider returned {found} embeddings for {expected} inputs")]
    EmbeddingCount { expected: usize, found: usize },
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// Exponential backoff with multiplicative jitter in [0.5, 1.5).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Retries without sleeping.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            base_delay: Duration::ZERO,
            factor: 1.0,
        }
    }

    fn delay(&self, retry: u32) -> Duration {
        if self.base_delay.is_zero() {
            return Duration::ZERO;
        }
        let nominal = self.base_delay.as_secs_f64() * self.factor.powi(retry as i32);
        Duration::from_secs_f64(nominal * rand::rng().random_range(0.5..1.5))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CallRecord {
    pub kind: String,
    pub model: String,
    pub profile: ProfileLabel,
    pub attempts: u32,
    pub ok: bool,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

/// Counting semaphore bounding in-flight provider calls.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Slots {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().expect("slot lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("slot lock");
        }
        *free -= 1;
        SlotGuard(self)
    }
}

struct SlotGuard<'a>(&'a Slots);

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("slot lock") += 1;
        self.0.cv.notify_one();
    }
}

/// Keyed by (model, text).
type EmbeddingCache = HashMap<(String, String), Arc<[f64]>>;

pub struct Gateway {
    backend: Box<dyn Backend>,
    policy: RetryPolicy,
    slots: Slots,
    calls: Mutex<Vec<CallRecord>>,
    embeddings: Mutex<EmbeddingCache>,
    dimension: Mutex<Option<usize>>,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, policy: RetryPolicy, in_flight: usize) -> Self {
        Self {
            backend,
            policy,
            slots: Slots::new(in_flight),
            calls: Mutex::new(Vec::new()),
            embeddings: Mutex::new(HashMap::new()),
            dimension: Mutex::new(None),
        }
    }

    fn with_retry<T>(
        &self,
        mut attempt: impl FnMut() -> Result<T, BackendError>,
    ) -> (u32, Result<T, GatewayError>) {
        let mut tries = 0;
        loop {
            tries += 1;
            let result = {
                let _slot = self.slots.acquire();
                attempt()
            };
            match result {
                Ok(v) => return (tries, Ok(v)),
                Err(BackendError::Rejected { status, message }) => {
                    return (tries, Err(GatewayError::Rejected { status, message }))
                }
                Err(e) if e.retryable() && tries < self.policy.max_attempts => {
                    std::thread::sleep(self.policy.delay(tries - 1));
                }
                Err(last) => {
                    return (
                        tries,
                        Err(GatewayError::Exhausted {
                            attempts: tries,
                            last,
                        }),
                    )
                }
            }
        }
    }

    pub fn chat(&self, request: &ChatRequest) -> Result<String, GatewayError> {
        let (attempts, result) = self.with_retry(|| {
            let reply = self.backend.chat(request)?;
            if reply.text.trim().is_empty() {
                return Err(BackendError::Empty);
            }
            Ok(reply)
        });
        let usage = result.as_ref().map(|r| r.usage.clone()).unwrap_or_default();
        self.calls.lock().expect("call ledger").push(CallRecord {
            kind: request.kind.slug().to_string(),
            model: request.model.clone(),
            profile: request.profile.label,
            attempts,
            ok: result.is_ok(),
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
        });
        result.map(|r| r.text)
    }

    /// Embeds `text`, reusing earlier results for the same model and text.
    pub fn embed(&self, model: &str, text: &str) -> Result<Arc<[f64]>, GatewayError> {
        let key = (model.to_string(), text.to_string());
        if let Some(v) = self.embeddings.lock().expect("embedding cache").get(&key) {
            return Ok(v.clone());
        }
        let input = [text.to_string()];
        let (attempts, result) = self.with_retry(|| self.backend.embed(model, &input));
        self.calls.lock().expect("call ledger").push(CallRecord {
            kind: "embedding".into(),
            model: model.into(),
            profile: ProfileLabel::Deterministic,
            attempts,
            ok: result.is_ok(),
            prompt_tokens: 0,
            completion_tokens: 0,
        });
        let mut vectors = result?;
        if vectors.len() != 1 {
            return Err(GatewayError::EmbeddingCount {
                expected: 1,
                found: vectors.len(),
            });
        }
        let v: Arc<[f64]> = vectors.remove(0).into();
        {
            let mut dim = self.dimension.lock().expect("dimension lock");
            match *dim {
                Some(expected) if expected != v.len() => {
                    return Err(GatewayError::DimensionMismatch {
                        expected,
                        found: v.len(),
                    })
                }
                _ => *dim = Some(v.len()),
            }
        }
        self.embeddings
            .lock()
            .expect("embedding cache")
            .insert(key, v.clone());
        Ok(v)
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().expect("call ledger").clone()
    }
}

/// A model identifier bound to a gateway.
#[derive(Clone)]
pub struct ModelHandle {
    gateway: Arc<Gateway>,
    model: String,
}

impl ModelHandle {
    pub fn new(gateway: Arc<Gateway>, model: impl Into<String>) -> Self {
        Self {
            gateway,
            model: model.into(),
        }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    /// Renders `kind` with `ctx` and sends it under the kind's profile.
    pub fn complete(&self, kind: PromptKind, ctx: &PromptContext) -> Result<String, GatewayError> {
        let request = ChatRequest {
            model: self.model.clone(),
            kind,
            messages: render_messages(kind, ctx)?,
            profile: SamplingProfile::for_label(kind.profile()),
        };
        self.gateway.chat(&request)
    }

    pub fn embed(&self, text: &str) -> Result<Arc<[f64]>, GatewayError> {
        self.gateway.embed(&self.model, text)
    }
}
