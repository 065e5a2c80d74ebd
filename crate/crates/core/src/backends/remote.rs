use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, QueryContext, RunKey, Session};

fn default_timeout() -> f64 {
    60.0
}
fn default_transport_retries() -> u32 {
    3
}
fn default_backoff_ms() -> u64 {
    500
}

/// Chat-completions endpoint settings. The API key itself is read from the
/// environment variable named by `api_key_env`, never from the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteChatConfig {
    /// e.g. `https://api.openai.com/v1`; `/chat/completions` is appended.
    pub base_url: String,
    pub model: String,
    pub api_key_env: String,
    /// Omitted from requests unless set, leaving the provider default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_response_tokens: Option<u32>,
    /// Request rate ceiling shared by all sessions of the backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_second: Option<f64>,
    /// Resends after connection failures or timeouts. These are not
    /// counted as generation attempts.
    #[serde(default = "default_transport_retries")]
    pub max_transport_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
}

impl RemoteChatConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key_env: api_key_env.into(),
            temperature: None,
            top_p: None,
            timeout_secs: default_timeout(),
            max_response_tokens: None,
            requests_per_second: None,
            max_transport_retries: default_transport_retries(),
            backoff_ms: default_backoff_ms(),
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        let bad = |m: String| Err(BackendError::Config(m));
        if self.base_url.is_empty() || self.model.is_empty() || self.api_key_env.is_empty() {
            return bad("base_url, model and api_key_env must be non-empty".into());
        }
        if let Some(p) = self.top_p {
            if !(p > 0.0 && p <= 1.0) {
                return bad(format!("top_p must be in (0, 1], got {p}"));
            }
        }
        if let Some(t) = self.temperature {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("temperature must be non-negative, got {t}"));
            }
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return bad(format!("timeout_secs must be positive, got {}", self.timeout_secs));
        }
        if let Some(q) = self.requests_per_second {
            if !(q > 0.0 && q.is_finite()) {
                return bad(format!("requests_per_second must be positive, got {q}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

/// Request body: one user message, no conversation state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

/// Spaces requests at least `1 / qps` apart.
#[derive(Debug)]
struct RateLimiter {
    interval: Duration,
    next_slot: Mutex<Instant>,
}

impl RateLimiter {
    fn new(qps: f64) -> Self {
        Self {
            interval: Duration::from_secs_f64(1.0 / qps),
            next_slot: Mutex::new(Instant::now()),
        }
    }

    fn acquire(&self) {
        let wait = {
            let mut next = self.next_slot.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot - now
        };
        if !wait.is_zero() {
            thread::sleep(wait);
        }
    }
}

pub struct RemoteChatBackend {
    config: RemoteChatConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    limiter: Option<RateLimiter>,
}

impl RemoteChatBackend {
    /// Fails with [`BackendError::MissingApiKey`] before any request is made
    /// when the key variable is unset.
    pub fn new(config: RemoteChatConfig) -> Result<Self, BackendError> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| BackendError::MissingApiKey(config.api_key_env.clone()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        let limiter = config.requests_per_second.map(RateLimiter::new);
        Ok(Self {
            config,
            api_key,
            client,
            limiter,
        })
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    pub fn request_body(&self, prompt: &str) -> ChatRequest {
        ChatRequest {
            model: self.config.model.clone(),
            messages: vec![ChatMessage {
                role: "user".into(),
                content: prompt.to_owned(),
            }],
            temperature: self.config.temperature,
            top_p: self.config.top_p,
            max_tokens: self.config.max_response_tokens,
        }
    }

    fn send_once(&self, body: &ChatRequest) -> Result<String, BackendError> {
        if let Some(l) = &self.limiter {
            l.acquire();
        }
        let response = self
            .client
            .post(self.endpoint())
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = response.status();
        let text = response
            .text()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(classify_error(status.as_u16(), &text));
        }
        extract_content(&text)
    }

    /// One query with transport-level resends and exponential backoff.
    pub fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        let body = self.request_body(prompt);
        let mut attempt = 0;
        loop {
            match self.send_once(&body) {
                Err(BackendError::Transport(msg)) if attempt < self.config.max_transport_retries => {
                    let delay = self.config.backoff_ms.saturating_mul(1 << attempt.min(16));
                    log::warn!("transport error ({msg}); retrying in {delay} ms");
                    thread::sleep(Duration::from_millis(delay));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }
}

fn classify_error(status: u16, body: &str) -> BackendError {
    let lower = body.to_ascii_lowercase();
    if lower.contains("context_length_exceeded")
        || lower.contains("context length")
        || lower.contains("maximum context")
        || status == 413
    {
        return BackendError::ContextLength(body.to_owned());
    }
    let message = serde_json::from_str::<serde_json::Value>(body)
        .ok()
        .and_then(|v| v.pointer("/error/message").and_then(|m| m.as_str()).map(str::to_owned))
        .unwrap_or_else(|| body.to_owned());
    BackendError::Api { status, message }
}

fn extract_content(body: &str) -> Result<String, BackendError> {
    let malformed = |why: &str| BackendError::Api {
        status: 200,
        message: format!("malformed completion ({why})"),
    };
    let v: serde_json::Value = serde_json::from_str(body).map_err(|_| malformed("not JSON"))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_owned)
        .ok_or_else(|| malformed("no choices[0].message.content"))
}

impl Backend for RemoteChatBackend {
    fn name(&self) -> String {
        format!("remote_chat:{}", self.config.model)
    }

    fn open_session(&self, _run: &RunKey) -> Result<Box<dyn Session + '_>, BackendError> {
        Ok(Box::new(RemoteSession { backend: self }))
    }
}

struct RemoteSession<'a> {
    backend: &'a RemoteChatBackend,
}

impl Session for RemoteSession<'_> {
    fn generate(&mut self, prompt: &str, _ctx: &QueryContext<'_>) -> Result<String, BackendError> {
        self.backend.complete(prompt)
    }
}
