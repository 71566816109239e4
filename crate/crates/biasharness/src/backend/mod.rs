//! Chat-completion backends: a real HTTP client, a deterministic mock for
//! tests and offline runs, and a file cache in front of either.

mod cache;
mod http;
mod mock;

pub use cache::{cached_complete, CacheKey, FileCache};
pub use http::{EndpointConfig, HttpBackend, DEFAULT_API_KEY_ENV};
pub use mock::{MockBackend, MockScript};

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Message {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// One chat-completion request. Temperature is always explicit; endpoint
/// defaults are never relied on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
}

impl ChatRequest {
    pub fn new(
        model: impl Into<String>,
        messages: Vec<Message>,
        temperature: f64,
    ) -> Result<Self, BackendError> {
        if messages.is_empty() {
            return Err(BackendError::InvalidRequest("messages must not be empty".into()));
        }
        Ok(ChatRequest {
            model: model.into(),
            messages,
            temperature,
        })
    }

    /// Content of the last user message, the part a keyed mock matches on.
    pub fn last_user_content(&self) -> Option<&str> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
    }
}

/// A completed request. `text` may be empty; that is recorded and surfaces
/// as a parse failure downstream rather than an error here.
#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub model: String,
    pub latency: Duration,
    pub from_cache: bool,
    /// Retries performed before success (0 on first-attempt success).
    pub retries: u32,
}

/// Anything that can answer a chat request.
pub trait Backend: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError>;

    /// Short identifier for logs and manifests.
    fn describe(&self) -> String;
}

/// Exponential backoff settings for transient failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay_ms: u64,
    pub factor: f64,
    pub jitter: bool,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay_ms: 1000,
            factor: 2.0,
            jitter: true,
        }
    }
}

impl RetryPolicy {
    /// Backoff before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        let exp = self.factor.powi(retry.saturating_sub(1) as i32);
        let millis = self.base_delay_ms as f64 * exp;
        let millis = if self.jitter {
            // uniform in [0.5, 1.5) of the nominal delay
            millis * (0.5 + rand::random::<f64>())
        } else {
            millis
        };
        Duration::from_millis(millis.min(60_000.0) as u64)
    }
}
