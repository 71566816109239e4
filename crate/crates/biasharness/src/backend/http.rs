//! HTTP chat-completion client.
//!
//! Speaks the widely adopted chat-completions dialect (messages array in,
//! choices array out), so remote APIs and on-premise servers are both just
//! an endpoint URL.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

use super::{Backend, ChatRequest, Completion, RetryPolicy};

/// Default environment variable holding the endpoint credential.
pub const DEFAULT_API_KEY_ENV: &str = "BIASHARNESS_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL up to but excluding `/chat/completions`.
    pub base_url: String,
    /// Name of the environment variable holding the credential. A missing
    /// variable is allowed for keyless on-premise servers.
    pub api_key_env: String,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_secs: 60,
            retry: RetryPolicy::default(),
        }
    }

    fn completions_url(&self) -> String {
        format!("{}/chat/completions", self.base_url.trim_end_matches('/'))
    }
}

pub struct HttpBackend {
    config: EndpointConfig,
    client: reqwest::blocking::Client,
    api_key: Option<String>,
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [super::Message],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

enum AttemptError {
    Fatal(BackendError),
    Transient(TransientKind, String),
}

enum TransientKind {
    RateLimited,
    Timeout,
    Network,
    ServerError(u16),
}

impl HttpBackend {
    pub fn new(config: EndpointConfig) -> Self {
        let api_key = std::env::var(&config.api_key_env).ok().filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!(
                "credential variable {} not set; sending unauthenticated requests",
                config.api_key_env
            );
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .expect("default TLS backend available");
        HttpBackend {
            config,
            client,
            api_key,
        }
    }

    fn attempt(&self, request: &ChatRequest) -> Result<String, AttemptError> {
        let body = WireRequest {
            model: &request.model,
            messages: &request.messages,
            temperature: request.temperature,
        };
        let mut builder = self.client.post(self.config.completions_url()).json(&body);
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder.send().map_err(|e| {
            if e.is_timeout() {
                AttemptError::Transient(TransientKind::Timeout, e.to_string())
            } else {
                AttemptError::Transient(TransientKind::Network, e.to_string())
            }
        })?;

        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(AttemptError::Fatal(BackendError::Auth {
                status: status.as_u16(),
            }));
        }
        if status.as_u16() == 429 {
            return Err(AttemptError::Transient(
                TransientKind::RateLimited,
                "rate limited".into(),
            ));
        }
        if status.is_server_error() {
            return Err(AttemptError::Transient(
                TransientKind::ServerError(status.as_u16()),
                status.to_string(),
            ));
        }
        if !status.is_success() {
            let body = response.text().unwrap_or_default();
            return Err(AttemptError::Fatal(BackendError::Http {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            }));
        }

        let text = response.text().map_err(|e| {
            AttemptError::Transient(TransientKind::Network, format!("reading body: {e}"))
        })?;
        let parsed: WireResponse = serde_json::from_str(&text).map_err(|e| {
            AttemptError::Fatal(BackendError::MalformedResponse(format!(
                "{e}; body started with: {}",
                text.chars().take(200).collect::<String>()
            )))
        })?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| {
            AttemptError::Fatal(BackendError::MalformedResponse("no choices in response".into()))
        })?;
        Ok(choice.message.content.unwrap_or_default())
    }
}

impl Backend for HttpBackend {
    /// Send the request, retrying transient failures (429, 5xx, transport)
    /// with exponential backoff. Authentication failures are never retried.
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        let started = Instant::now();
        let max_attempts = self.config.retry.max_attempts.max(1);
        let mut last_transient: Option<(TransientKind, String)> = None;

        for attempt in 0..max_attempts {
            if attempt > 0 {
                let delay = self.config.retry.delay(attempt);
                log::info!(
                    "retry {attempt}/{} for {} after {:?}",
                    max_attempts - 1,
                    self.config.completions_url(),
                    delay
                );
                std::thread::sleep(delay);
            }
            match self.attempt(request) {
                Ok(text) => {
                    return Ok(Completion {
                        text,
                        model: request.model.clone(),
                        latency: started.elapsed(),
                        from_cache: false,
                        retries: attempt,
                    })
                }
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Transient(kind, message)) => {
                    log::warn!("transient backend failure (attempt {}): {message}", attempt + 1);
                    last_transient = Some((kind, message));
                }
            }
        }

        let (kind, message) = last_transient.expect("at least one attempt ran");
        Err(match kind {
            TransientKind::RateLimited => BackendError::RateLimited {
                attempts: max_attempts,
            },
            TransientKind::Timeout => BackendError::Timeout {
                attempts: max_attempts,
            },
            TransientKind::ServerError(status) => BackendError::Http {
                status,
                body: message,
            },
            TransientKind::Network => BackendError::Network {
                attempts: max_attempts,
                message,
            },
        })
    }

    fn describe(&self) -> String {
        format!("http:{}", self.config.base_url)
    }
}
