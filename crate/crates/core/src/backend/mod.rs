//! Completion backends: the abstract model call shared by the AEN engine,
//! the agent loops, the input-coercion assistant and metric judges.

mod cassette;
mod http;
mod scripted;

pub use cassette::{fingerprint, Cassette, CassetteEntry, RecordingBackend, ReplayBackend};
pub use http::{InFlightGate, OpenAiCompatBackend, OpenAiConfig, DEFAULT_API_KEY_ENV};
pub use scripted::{FnBackend, ScriptedBackend};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default generation cap per request.
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    #[serde(default)]
    pub images: Vec<String>,
    pub max_tokens: u32,
    pub temperature: f64,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        Self {
            prompt: prompt.into(),
            images: Vec::new(),
            max_tokens: DEFAULT_MAX_TOKENS,
            temperature: 0.0,
        }
    }

    pub fn with_images(mut self, images: impl IntoIterator<Item = String>) -> Self {
        self.images = images.into_iter().collect();
        self
    }

    /// Caps `max_tokens` at the configured generation limit.
    pub fn with_max_tokens(mut self, max_tokens: u32, limit: u32) -> Self {
        self.max_tokens = max_tokens.min(limit);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("quota exceeded: {0}")]
    Quota(String),
    #[error("scripted backend has no responses left")]
    ScriptExhausted,
    #[error("cassette mismatch at entry {index}: expected {expected}, got {actual}")]
    CassetteMismatch {
        index: usize,
        expected: String,
        actual: String,
    },
    #[error("cassette exhausted after {0} entries")]
    CassetteExhausted(usize),
    #[error("cassette write failed: {0}")]
    CassetteWrite(String),
    #[error("backend configuration: {0}")]
    Config(String),
}

/// A text-completion model. Implementations must tolerate concurrent callers.
pub trait CompletionBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }
}
