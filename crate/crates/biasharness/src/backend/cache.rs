//! Content-addressed completion cache: one JSON document per completion,
//! keyed by a digest over the full request. Inspectable with any text tool
//! and safe for concurrent readers; inserts write to a temp file and rename.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::BackendError;

use super::{Backend, ChatRequest, Completion};

/// Digest over (model, messages, temperature). Equal requests yield equal
/// keys; any field change yields a different key.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn of(request: &ChatRequest) -> Self {
        let canonical =
            serde_json::to_vec(request).expect("chat requests always serialize");
        CacheKey(hex::encode(Sha256::digest(&canonical)))
    }

    pub fn as_hex(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    digest: String,
    request: ChatRequest,
    response_text: String,
    created_at: String,
}

/// Directory-backed completion store.
#[derive(Debug, Clone)]
pub struct FileCache {
    dir: PathBuf,
}

impl FileCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FileCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.as_hex()))
    }

    pub fn get(&self, key: &CacheKey) -> Option<String> {
        let text = std::fs::read_to_string(self.path_for(key)).ok()?;
        let entry: CacheEntry = serde_json::from_str(&text).ok()?;
        Some(entry.response_text)
    }

    pub fn put(&self, key: &CacheKey, request: &ChatRequest, response_text: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let entry = CacheEntry {
            digest: key.as_hex().to_string(),
            request: request.clone(),
            response_text: response_text.to_string(),
            created_at: chrono::Utc::now().to_rfc3339(),
        };
        let body = serde_json::to_vec_pretty(&entry)?;
        let final_path = self.path_for(key);
        let tmp = self.dir.join(format!(
            ".{}.{}.tmp",
            key.as_hex(),
            std::process::id()
        ));
        std::fs::write(&tmp, body)?;
        std::fs::rename(&tmp, final_path)?;
        Ok(())
    }
}

/// Answer from cache when possible, otherwise call the backend and store the
/// result. Cache I/O failures degrade to an uncached call with a warning
/// instead of failing the request.
pub fn cached_complete(
    request: &ChatRequest,
    backend: &dyn Backend,
    cache: &FileCache,
) -> Result<Completion, BackendError> {
    let key = CacheKey::of(request);
    let start = Instant::now();
    if let Some(text) = cache.get(&key) {
        return Ok(Completion {
            text,
            model: request.model.clone(),
            latency: start.elapsed(),
            from_cache: true,
            retries: 0,
        });
    }
    let completion = backend.complete(request)?;
    if let Err(e) = cache.put(&key, request, &completion.text) {
        log::warn!("cache write failed for {}: {e}; continuing uncached", key.as_hex());
    }
    Ok(completion)
}
