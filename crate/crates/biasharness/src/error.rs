//! Error types shared across the harness, plus the process exit codes the
//! CLI maps them to.

use thiserror::Error;

/// Top-level harness error.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration: unknown variant, invalid column map, invalid spec.
    #[error("configuration error: {0}")]
    Config(String),

    /// Dataset-level problem: unmappable label, missing column, hash mismatch.
    #[error("data error: {0}")]
    Data(String),

    /// Backend/transport failure that aborted an operation.
    #[error(transparent)]
    Backend(#[from] BackendError),

    /// A detection run finished but some units never produced a parseable
    /// response.
    #[error("partial coverage: {covered} of {total} units covered")]
    PartialCoverage { covered: usize, total: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl Error {
    /// Process exit code for this error class.
    ///
    /// 0 success, 2 configuration, 3 data, 4 backend/IO, 5 partial coverage.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Backend(_) => 4,
            Error::PartialCoverage { .. } => 5,
            Error::Io(_) | Error::Serde(_) => 4,
        }
    }
}

/// Failures raised by a chat-completion backend.
#[derive(Debug, Error)]
pub enum BackendError {
    /// Credential rejected by the endpoint. Never retried.
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },

    /// Rate limit still in force after all retry attempts.
    #[error("rate limited: gave up after {attempts} attempts")]
    RateLimited { attempts: u32 },

    /// Endpoint answered with something that is not a chat completion.
    #[error("malformed endpoint response: {0}")]
    MalformedResponse(String),

    /// Non-retryable HTTP error status.
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },

    /// Transport-level failure after all retry attempts.
    #[error("network error: gave up after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },

    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },

    /// An ordered mock script ran out of responses.
    #[error("mock script exhausted after {served} responses")]
    ScriptExhausted { served: usize },

    /// A keyed mock script has no entry for the request.
    #[error("mock script has no response for digest {digest}")]
    ScriptMiss { digest: String },

    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

pub type Result<T> = std::result::Result<T, Error>;
