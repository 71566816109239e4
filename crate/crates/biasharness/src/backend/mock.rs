//! Deterministic scripted backend for tests and offline runs.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::BackendError;

use super::{Backend, ChatRequest, Completion};

fn user_digest(content: &str) -> String {
    hex::encode(Sha256::digest(content.as_bytes()))
}

enum Script {
    /// Responses served in order; exhaustion is an explicit error.
    Ordered(Mutex<std::collections::VecDeque<String>>),
    /// Responses matched on a digest of the last user message.
    Keyed(HashMap<String, String>),
}

/// Scripted chat backend. Ordered mode replays a fixed response sequence;
/// keyed mode looks responses up by the user message, which makes it safe
/// under concurrent dispatch.
pub struct MockBackend {
    script: Script,
    calls: AtomicUsize,
    served: AtomicUsize,
}

impl MockBackend {
    pub fn ordered(responses: Vec<String>) -> Self {
        MockBackend {
            script: Script::Ordered(Mutex::new(responses.into())),
            calls: AtomicUsize::new(0),
            served: AtomicUsize::new(0),
        }
    }

    /// Keyed script addressed by raw user-message content; digests are
    /// computed here.
    pub fn keyed_by_content<I, K, V>(entries: I) -> Self
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: Into<String>,
    {
        let map = entries
            .into_iter()
            .map(|(k, v)| (user_digest(k.as_ref()), v.into()))
            .collect();
        MockBackend {
            script: Script::Keyed(map),
            calls: AtomicUsize::new(0),
            served: AtomicUsize::new(0),
        }
    }

    /// Keyed script addressed by precomputed hex digests.
    pub fn keyed_by_digest(entries: HashMap<String, String>) -> Self {
        MockBackend {
            script: Script::Keyed(entries),
            calls: AtomicUsize::new(0),
            served: AtomicUsize::new(0),
        }
    }

    /// Number of completions requested so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<Completion, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = match &self.script {
            Script::Ordered(queue) => {
                let mut queue = queue.lock().expect("mock script lock");
                queue.pop_front().ok_or(BackendError::ScriptExhausted {
                    served: self.served.load(Ordering::SeqCst),
                })?
            }
            Script::Keyed(map) => {
                let content = request.last_user_content().unwrap_or_default();
                let digest = user_digest(content);
                map.get(&digest)
                    .cloned()
                    .ok_or(BackendError::ScriptMiss { digest })?
            }
        };
        self.served.fetch_add(1, Ordering::SeqCst);
        Ok(Completion {
            text,
            model: request.model.clone(),
            latency: Duration::ZERO,
            from_cache: false,
            retries: 0,
        })
    }

    fn describe(&self) -> String {
        match &self.script {
            Script::Ordered(_) => "mock:ordered".into(),
            Script::Keyed(map) => format!("mock:keyed({} entries)", map.len()),
        }
    }
}

/// On-disk form of a mock script, so the CLI can run fully offline with
/// `--endpoint mock:<script.json>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum MockScript {
    Ordered {
        responses: Vec<String>,
    },
    Keyed {
        /// Raw user-message content -> response text.
        #[serde(default)]
        by_content: HashMap<String, String>,
        /// Hex digest of user-message content -> response text.
        #[serde(default)]
        by_digest: HashMap<String, String>,
    },
}

impl MockScript {
    pub fn load(path: &std::path::Path) -> crate::error::Result<MockBackend> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            crate::error::Error::Config(format!("mock script {}: {e}", path.display()))
        })?;
        let script: MockScript = serde_json::from_str(&text).map_err(|e| {
            crate::error::Error::Config(format!("mock script {}: {e}", path.display()))
        })?;
        Ok(script.into_backend())
    }

    pub fn into_backend(self) -> MockBackend {
        match self {
            MockScript::Ordered { responses } => MockBackend::ordered(responses),
            MockScript::Keyed {
                by_content,
                by_digest,
            } => {
                let mut map: HashMap<String, String> = by_digest;
                for (content, response) in by_content {
                    map.insert(user_digest(&content), response);
                }
                MockBackend::keyed_by_digest(map)
            }
        }
    }
}
