//! Uniform access to chat-completion backends plus extraction of structured
//! candidate lists from free-form model output.
//!
//! The [`Gateway`] wraps a [`ChatBackend`] with retry (exponential backoff),
//! an optional total-request budget, and a cap on in-flight upstream
//! requests. Two backends ship: an OpenAI-compatible HTTP client and a
//! deterministic mock keyed by request hash.

mod extract;
mod http;
mod mock;

pub use extract::{extract_candidate_list, extract_choice, serialize_candidate_list};
pub use http::HttpBackend;
pub use mock::MockBackend;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Message author role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::User => "user",
            Role::Assistant => "assistant",
        }
    }
}

/// One chat turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// A chat-completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl LlmRequest {
    pub fn new(model_id: impl Into<String>, user_content: impl Into<String>) -> Self {
        Self {
            model_id: model_id.into(),
            system: None,
            messages: vec![ChatMessage::user(user_content)],
            temperature: 0.0,
            max_tokens: 4096,
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !self.messages.iter().any(|m| m.role == Role::User) {
            return Err(GatewayError::InvalidRequest(
                "at least one user message required".into(),
            ));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        Ok(())
    }

    /// Canonical serialization used for fixture filenames and cache keys.
    ///
    /// Field order is fixed and the temperature is rendered with four
    /// decimals so that equal requests always hash identically.
    pub fn canonical_json(&self) -> String {
        #[derive(Serialize)]
        struct Canon<'a> {
            model: &'a str,
            system: Option<&'a str>,
            messages: Vec<(&'static str, &'a str)>,
            temperature: String,
            max_tokens: u32,
        }
        let canon = Canon {
            model: &self.model_id,
            system: self.system.as_deref(),
            messages: self
                .messages
                .iter()
                .map(|m| (m.role.as_str(), m.content.as_str()))
                .collect(),
            temperature: format!("{:.4}", self.temperature),
            max_tokens: self.max_tokens,
        };
        serde_json::to_string(&canon).expect("canonical request serializes")
    }

    /// SHA-256 hex of [`Self::canonical_json`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        hex_encode(&digest)
    }
}

pub(crate) fn hex_encode(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// A parsed element of a model-emitted candidate list. No validation happens
/// at parse time; a non-numeric score surfaces as `plausibility: None` and is
/// rejected downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCandidateRecord {
    pub answer: String,
    pub plausibility: Option<f64>,
    pub justification: String,
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("transport error after {attempts} attempts: {message}")]
    Transport { attempts: usize, message: String },
    #[error("credential rejected: {0}")]
    Auth(String),
    #[error("request budget of {0} upstream calls exhausted")]
    BudgetExceeded(u64),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no fixture for request hash {0}")]
    MissingFixture(String),
}

/// Backend abstraction: return the assistant message text for a request.
///
/// `Err(Retryable)` outcomes are distinguished inside implementations by
/// returning [`BackendError::Retryable`]; everything else is final.
pub trait ChatBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError>;
    fn name(&self) -> &str;
}

/// Backend-level failure classification that drives the retry loop.
#[derive(Debug, Error)]
pub enum BackendError {
    #[error("{0}")]
    Retryable(String),
    #[error("credential rejected: {0}")]
    Auth(String),
    #[error("{0}")]
    Fatal(String),
}

/// Retry schedule for transient transport failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub factor: u32,
    pub max_tries: usize,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base_delay: Duration::from_secs(1),
            factor: 2,
            max_tries: 5,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    fn delay(&self, retry: usize) -> Duration {
        self.base_delay * self.factor.saturating_pow(retry.saturating_sub(1) as u32)
    }
}

/// Counting semaphore bounding in-flight upstream requests.
struct InFlightCap {
    limit: usize,
    state: Mutex<usize>,
    cv: Condvar,
}

impl InFlightCap {
    fn new(limit: usize) -> Self {
        Self {
            limit: limit.max(1),
            state: Mutex::new(0),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.state.lock().unwrap();
        while *used >= self.limit {
            used = self.cv.wait(used).unwrap();
        }
        *used += 1;
        InFlightGuard { cap: self }
    }
}

struct InFlightGuard<'a> {
    cap: &'a InFlightCap,
}

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut used = self.cap.state.lock().unwrap();
        *used -= 1;
        self.cap.cv.notify_one();
    }
}

/// Shared front door to a chat backend: retries transient failures with
/// exponential backoff, enforces the optional request budget, caps in-flight
/// upstream calls, and counts every upstream call for run manifests.
pub struct Gateway {
    backend: Box<dyn ChatBackend>,
    retry: RetryPolicy,
    budget: Option<u64>,
    calls: AtomicU64,
    cap: InFlightCap,
}

impl Gateway {
    pub fn new(backend: Box<dyn ChatBackend>) -> Self {
        Self {
            backend,
            retry: RetryPolicy::default(),
            budget: None,
            calls: AtomicU64::new(0),
            cap: InFlightCap::new(8),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    /// Cap the total number of upstream calls this gateway may issue.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn with_in_flight_cap(mut self, limit: usize) -> Self {
        self.cap = InFlightCap::new(limit);
        self
    }

    /// Upstream calls issued so far (each retry counts).
    pub fn calls_made(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Complete a request, retrying transient transport failures.
    pub fn complete(&self, request: &LlmRequest) -> Result<String, GatewayError> {
        request.validate()?;
        let mut last_err = String::new();
        for attempt in 1..=self.retry.max_tries {
            if attempt > 1 {
                std::thread::sleep(self.retry.delay(attempt - 1));
            }
            if let Some(budget) = self.budget {
                // Reserve a slot in the budget before dispatching.
                let prior = self.calls.fetch_add(1, Ordering::SeqCst);
                if prior >= budget {
                    self.calls.fetch_sub(1, Ordering::SeqCst);
                    return Err(GatewayError::BudgetExceeded(budget));
                }
            } else {
                self.calls.fetch_add(1, Ordering::SeqCst);
            }
            let _guard = self.cap.acquire();
            match self.backend.complete(request) {
                Ok(text) => return Ok(text),
                Err(BackendError::Auth(msg)) => return Err(GatewayError::Auth(msg)),
                Err(BackendError::Fatal(msg)) => {
                    return Err(GatewayError::Transport {
                        attempts: attempt,
                        message: msg,
                    })
                }
                Err(BackendError::Retryable(msg)) => {
                    log::warn!(
                        "transient failure from {} (attempt {attempt}): {msg}",
                        self.backend.name()
                    );
                    last_err = msg;
                }
            }
        }
        Err(GatewayError::Transport {
            attempts: self.retry.max_tries,
            message: last_err,
        })
    }
}
