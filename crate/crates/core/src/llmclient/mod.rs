//! Chat-completion access: request keys, pluggable backends (mock, replay,
//! live HTTP), recording, rate limiting, retries and cost accounting.

mod cassette;
mod clock;
mod ledger;
mod live;
mod mock;
mod ratelimit;

use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use cassette::{Cassette, CassetteEntry, CassetteError, CassetteMetadata, RecordingBackend, ReplayBackend};
pub use clock::{Clock, SystemClock, VirtualClock};
pub use ledger::{reduction, reduction_tenths, CostLedger, CostSummary, ModelAccount};
pub use live::{LiveBackend, API_KEY_ENV};
pub use mock::MockAnalyst;
pub use ratelimit::RateLimiter;

/// One chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub system_text: String,
    pub user_text: String,
    pub temperature: f64,
    pub top_p: f64,
    /// Number of completions requested.
    pub n: u32,
    /// Workflow-level attempt, starting at 1.
    pub attempt: u32,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model_id: &'a str,
    system_text: &'a str,
    user_text: &'a str,
    temperature: f64,
    top_p: f64,
    n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    attempt: Option<u32>,
}

impl ChatRequest {
    /// Hex SHA-256 over the canonical request content. The attempt number
    /// only enters the key from the second attempt on, so first attempts
    /// keep stable keys while retries get cassette entries of their own.
    pub fn request_key(&self) -> String {
        let material = KeyMaterial {
            model_id: &self.model_id,
            system_text: &self.system_text,
            user_text: &self.user_text,
            temperature: self.temperature,
            top_p: self.top_p,
            n: self.n,
            attempt: (self.attempt > 1).then_some(self.attempt),
        };
        let bytes = serde_json::to_vec(&material).expect("key material is serializable");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// The completions of one request and the tokens they consumed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub texts: Vec<String>,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub model_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("no cassette entry for request {key}")]
    CassetteMiss { key: String },
    #[error("rate limited by the endpoint")]
    RateLimited { retry_after: Option<Duration> },
    #[error("model returned no content")]
    EmptyResponse,
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    #[error("endpoint rejected the request ({status}): {body}")]
    Rejected { status: u16, body: String },
    #[error("configuration error: {0}")]
    Config(String),
}

impl LlmError {
    pub fn is_retryable(&self) -> bool {
        match self {
            LlmError::RateLimited { .. } | LlmError::EmptyResponse => true,
            LlmError::Transport { retryable, .. } => *retryable,
            _ => false,
        }
    }
}

/// Something that answers chat requests.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError>;
    /// Short name recorded in run metadata.
    fn name(&self) -> &'static str;
}

/// Exponential backoff with jitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
    /// Fraction of each delay added as uniform random jitter.
    pub jitter: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            max_delay: Duration::from_secs(32),
            jitter: 0.25,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32, rng: &mut impl Rng) -> Duration {
        let exp = self.base_delay.saturating_mul(1u32 << (retry - 1).min(16));
        let capped = exp.min(self.max_delay);
        let jitter = if self.jitter > 0.0 {
            capped.mul_f64(rng.gen_range(0.0..self.jitter))
        } else {
            Duration::ZERO
        };
        capped + jitter
    }
}

/// Backend plus rate limiting, retries and cost accounting.
pub struct LlmClient {
    backend: Arc<dyn ChatBackend>,
    ledger: Arc<CostLedger>,
    limiter: Option<Arc<RateLimiter>>,
    clock: Arc<dyn Clock>,
    retry: RetryPolicy,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn ChatBackend>, ledger: Arc<CostLedger>) -> LlmClient {
        LlmClient {
            backend,
            ledger,
            limiter: None,
            clock: Arc::new(SystemClock::new()),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_rate_limiter(mut self, limiter: Arc<RateLimiter>) -> LlmClient {
        self.limiter = Some(limiter);
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> LlmClient {
        self.clock = clock;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> LlmClient {
        self.retry = retry;
        self
    }

    pub fn ledger(&self) -> &Arc<CostLedger> {
        &self.ledger
    }

    pub fn backend_name(&self) -> &'static str {
        self.backend.name()
    }

    /// Sends a request, retrying transient failures. The ledger is charged
    /// exactly once, on success. Exhausted retries surface as a retryable
    /// `Transport` error so callers can reschedule the work.
    pub fn complete(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let key = req.request_key();
        let seed = u64::from_str_radix(&key[..16], 16).expect("hex key");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut last = None;
        for attempt in 1..=self.retry.max_attempts.max(1) {
            if attempt > 1 {
                let backoff = self.retry.delay(attempt - 1, &mut rng);
                let wait = match &last {
                    Some(LlmError::RateLimited {
                        retry_after: Some(after),
                    }) => (*after).max(backoff),
                    _ => backoff,
                };
                self.clock.sleep(wait);
            }
            if let Some(limiter) = &self.limiter {
                limiter.acquire(self.clock.as_ref());
            }
            match self.backend.complete(req) {
                Ok(resp) if resp.texts.iter().all(|t| t.trim().is_empty()) => {
                    last = Some(LlmError::EmptyResponse);
                }
                Ok(resp) => {
                    self.ledger
                        .record(&resp.model_id, resp.prompt_tokens, resp.completion_tokens);
                    return Ok(resp);
                }
                Err(e) if e.is_retryable() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        let cause = last.map_or_else(|| "no attempt made".to_string(), |e| e.to_string());
        Err(LlmError::Transport {
            message: format!("gave up after {} attempts: {cause}", self.retry.max_attempts),
            retryable: true,
        })
    }
}
