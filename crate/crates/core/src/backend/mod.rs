//! The boundary to language models: completions, embeddings, a scripted
//! deterministic backend and an HTTP client for hosted models.

mod calllog;
mod embed;
mod registry;
mod remote;
mod scripted;

use thiserror::Error;

pub use calllog::{CallLog, CallRecord, LlmCaller};
pub use embed::{EmbedError, Embedder, HashingEmbedder, DEFAULT_DIMENSION};
pub use registry::{BackendConfig, BackendRegistry, RegistryError};
pub use remote::{RemoteBackend, RemoteConfig};
pub use scripted::{ScriptRule, ScriptedBackend};

/// Default completion length cap for every module prompt.
pub const DEFAULT_MAX_TOKENS: u32 = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: u32,
    pub temperature: f64,
    /// Caller label used in the call log (e.g. `plan.decompose`).
    pub tag: String,
}

impl CompletionRequest {
    pub fn new(tag: impl Into<String>, prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
            tag: tag.into(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.prompt.trim().is_empty() {
            return Err(BackendError::InvalidRequest("prompt is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(BackendError::InvalidRequest("temperature must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("request timed out after {after_ms} ms")]
    Timeout { after_ms: u64 },
    #[error("endpoint returned status {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("gave up after {attempts} attempts: {last}")]
    ExhaustedRetries {
        attempts: u32,
        last: Box<BackendError>,
    },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

/// A text completion model.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

/// FNV-1a 64-bit, shared by the embedder and prompt hashing.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    use std::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}
