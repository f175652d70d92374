use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, CompletionBackend, CompletionRequest};

/// Connection settings for a chat-completion style HTTP endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_env: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    250
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            token_env: None,
            timeout_ms: default_timeout_ms(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }
}

/// Blocking client for a hosted model. Sends a single user message and
/// reads `choices[0].message.content` (or `choices[0].text`) back.
pub struct RemoteBackend {
    config: RemoteConfig,
    token: Option<String>,
    agent: ureq::Agent,
}

impl fmt::Debug for RemoteBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteBackend")
            .field("config", &self.config)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

impl RemoteBackend {
    /// Reads the token from `config.token_env` if set.
    pub fn new(config: RemoteConfig) -> Self {
        let token = config
            .token_env
            .as_deref()
            .and_then(|name| std::env::var(name).ok());
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { config, token, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let mut call = self.agent.post(&self.config.endpoint);
        if let Some(token) = &self.token {
            call = call.header("Authorization", format!("Bearer {token}"));
        }
        let mut response = call.send_json(&body).map_err(|e| self.map_transport(e))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| self.map_transport(e))?;
        if !(200..300).contains(&status) {
            return Err(BackendError::Endpoint { status, body: text });
        }
        extract_text(&text)
    }

    fn map_transport(&self, e: ureq::Error) -> BackendError {
        match e {
            ureq::Error::Timeout(_) => BackendError::Timeout {
                after_ms: self.config.timeout_ms,
            },
            other => BackendError::Transport(other.to_string()),
        }
    }
}

fn retryable(e: &BackendError) -> bool {
    match e {
        BackendError::Endpoint { status, .. } => *status == 429 || *status >= 500,
        BackendError::Timeout { .. } | BackendError::Transport(_) => true,
        _ => false,
    }
}

fn extract_text(body: &str) -> Result<String, BackendError> {
    let v: Value = serde_json::from_str(body)
        .map_err(|e| BackendError::MalformedResponse(e.to_string()))?;
    let choice = &v["choices"][0];
    choice["message"]["content"]
        .as_str()
        .or_else(|| choice["text"].as_str())
        .map(str::to_string)
        .ok_or_else(|| BackendError::MalformedResponse("no choices[0] text".into()))
}

impl CompletionBackend for RemoteBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, BackendError> {
        request.validate()?;
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Ok(text) => return Ok(text),
                Err(e) if retryable(&e) && attempt < self.config.retries => {
                    log::warn!("{} attempt {} failed: {e}", self.config.endpoint, attempt + 1);
                    std::thread::sleep(Duration::from_millis(self.config.backoff_ms << attempt));
                    attempt += 1;
                }
                Err(e) if attempt > 0 => {
                    return Err(BackendError::ExhaustedRetries {
                        attempts: attempt + 1,
                        last: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}
