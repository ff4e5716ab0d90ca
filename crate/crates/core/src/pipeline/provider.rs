use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use super::cancel::CancelToken;
use super::mock::MockProvider;
use super::prompt::Prompt;
use super::remote::RemoteProvider;
use crate::model::{ProviderConfig, ProviderKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    /// Connection-level failure; retried once.
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    Malformed(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("request cancelled")]
    Cancelled,
}

impl ProviderError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, ProviderError::Transport(_))
    }
}

/// One completion call as sent to a provider.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    #[serde(skip)]
    pub prompt: Prompt,
    pub model: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stream: bool,
}

impl CompletionRequest {
    pub fn new(prompt: Prompt, cfg: &ProviderConfig, stream: bool) -> Self {
        CompletionRequest {
            prompt,
            model: cfg.model_id.clone(),
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
            stream,
        }
    }
}

/// A text-completion backend.
///
/// `on_chunk` receives incremental text when `request.stream` is set; the
/// returned string is always the full response text.
pub trait Provider: Send + Sync {
    fn complete(
        &self,
        request: &CompletionRequest,
        cancel: &CancelToken,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<String, ProviderError>;

    /// Whether the provider can take requests at all.
    fn ready(&self) -> Result<(), ProviderError> {
        Ok(())
    }

    /// Deterministic providers produce identical output for identical
    /// requests with negligible latency.
    fn is_deterministic(&self) -> bool {
        false
    }
}

pub fn provider_from_config(cfg: &ProviderConfig) -> Result<Arc<dyn Provider>, ProviderError> {
    match cfg.provider_kind {
        ProviderKind::Mock => Ok(Arc::new(MockProvider)),
        ProviderKind::Remote => Ok(Arc::new(RemoteProvider::new(cfg)?)),
    }
}

/// Calls the provider, retrying once on a transport error.
pub(crate) fn complete_with_retry(
    provider: &dyn Provider,
    request: &CompletionRequest,
    cancel: &CancelToken,
    on_chunk: &mut dyn FnMut(&str),
) -> Result<String, ProviderError> {
    match provider.complete(request, cancel, on_chunk) {
        Err(e) if e.is_retryable() && !cancel.is_cancelled() => {
            provider.complete(request, cancel, on_chunk)
        }
        other => other,
    }
}
