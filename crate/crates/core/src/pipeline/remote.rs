//! HTTP completion client speaking the `{model, prompt, temperature,
//! max_tokens, stream}` request format with server-sent-event streaming.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::time::Duration;

use serde_json::Value;

use super::cancel::CancelToken;
use super::provider::{CompletionRequest, Provider, ProviderError};
use crate::model::ProviderConfig;

pub const REQUEST_TIMEOUT: Duration = Duration::from_secs(30);

pub struct RemoteProvider {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key_env_var: String,
}

impl fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("endpoint", &self.endpoint)
            .field("api_key_env_var", &self.api_key_env_var)
            .finish_non_exhaustive()
    }
}

impl RemoteProvider {
    pub fn new(cfg: &ProviderConfig) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(REQUEST_TIMEOUT)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(RemoteProvider {
            client,
            endpoint: cfg.endpoint_url.clone(),
            api_key_env_var: cfg.api_key_env_var.clone(),
        })
    }

    /// `None` when no key variable is configured.
    fn api_key(&self) -> Result<Option<String>, ProviderError> {
        if self.api_key_env_var.is_empty() {
            return Ok(None);
        }
        std::env::var(&self.api_key_env_var)
            .map(Some)
            .map_err(|_| ProviderError::MissingApiKey(self.api_key_env_var.clone()))
    }
}

fn transport(e: reqwest::Error) -> ProviderError {
    ProviderError::Transport(e.to_string())
}

/// Pulls the generated text out of one response object.
fn choice_text(v: &Value) -> Option<&str> {
    let choice = v.get("choices")?.get(0)?;
    choice
        .get("text")
        .and_then(Value::as_str)
        .or_else(|| choice.pointer("/delta/content").and_then(Value::as_str))
        .or_else(|| choice.pointer("/message/content").and_then(Value::as_str))
}

impl Provider for RemoteProvider {
    fn complete(
        &self,
        request: &CompletionRequest,
        cancel: &CancelToken,
        on_chunk: &mut dyn FnMut(&str),
    ) -> Result<String, ProviderError> {
        let body = serde_json::json!({
            "model": request.model,
            "prompt": request.prompt.text,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "stream": request.stream,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = self.api_key()? {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(transport)?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(if status.is_server_error() || status.as_u16() == 429 {
                ProviderError::Transport(format!("HTTP {status}"))
            } else {
                ProviderError::Http {
                    status: status.as_u16(),
                    body: text,
                }
            });
        }
        if cancel.is_cancelled() {
            return Err(ProviderError::Cancelled);
        }

        if !request.stream {
            let v: Value = resp
                .json()
                .map_err(|e| ProviderError::Malformed(e.to_string()))?;
            return choice_text(&v)
                .map(str::to_string)
                .ok_or_else(|| ProviderError::Malformed("response has no choices[0].text".into()));
        }

        let mut full = String::new();
        for line in BufReader::new(resp).lines() {
            if cancel.is_cancelled() {
                return Err(ProviderError::Cancelled);
            }
            let line = line.map_err(|e| ProviderError::Transport(e.to_string()))?;
            let Some(data) = line.strip_prefix("data:") else {
                continue;
            };
            let data = data.trim();
            if data == "[DONE]" {
                break;
            }
            let v: Value =
                serde_json::from_str(data).map_err(|e| ProviderError::Malformed(e.to_string()))?;
            if let Some(text) = choice_text(&v) {
                if !text.is_empty() {
                    on_chunk(text);
                    full.push_str(text);
                }
            }
        }
        Ok(full)
    }

    fn ready(&self) -> Result<(), ProviderError> {
        self.api_key().map(|_| ())
    }
}
