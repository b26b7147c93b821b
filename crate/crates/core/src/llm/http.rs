//! Live chat-completions backend over HTTP.
//!
//! Speaks the widely implemented chat-completions wire shape: POST a JSON
//! body with `model`, one user message, `temperature`, and `max_tokens`;
//! read `choices[0].message.content` back. Transient failures (network
//! errors, 429, 5xx) are retried with exponential backoff; other client
//! errors fail immediately.

use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use crate::llm::{CompletionRequest, LlmBackend, LlmError};

/// Retry schedule for transient failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Total attempts, including the first (minimum 1).
    pub attempts: u32,
    /// Delay before the second attempt; doubles each retry.
    pub base_delay: Duration,
    /// Upper bound on any single delay.
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(10),
        }
    }
}

impl RetryPolicy {
    fn delay_after(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Connection settings for [`HttpBackend`].
#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub endpoint: String,
    /// Sent as a bearer token when present.
    pub api_key: Option<String>,
    pub request_timeout: Duration,
    pub retry: RetryPolicy,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".to_string(),
            api_key: None,
            request_timeout: Duration::from_secs(30),
            retry: RetryPolicy::default(),
        }
    }
}

/// [`LlmBackend`] over a chat-completions HTTP endpoint.
pub struct HttpBackend {
    config: HttpConfig,
    client: reqwest::blocking::Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

enum AttemptError {
    Transient(String),
    Fatal(LlmError),
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<HttpBackend, LlmError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.request_timeout)
            .build()
            .map_err(|e| LlmError::InvalidRequest(format!("cannot build HTTP client: {e}")))?;
        Ok(HttpBackend { config, client })
    }

    fn attempt(&self, request: &CompletionRequest) -> Result<String, AttemptError> {
        let body = json!({
            "model": request.params.model_name,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_reply_tokens,
        });
        let mut http = self.client.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            http = http.bearer_auth(key);
        }
        let response = http.send().map_err(|e| AttemptError::Transient(e.to_string()))?;

        let status = response.status();
        let text = response
            .text()
            .map_err(|e| AttemptError::Transient(format!("cannot read body: {e}")))?;
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(AttemptError::Transient(format!("status {status}")));
        }
        if !status.is_success() {
            return Err(AttemptError::Fatal(LlmError::Api {
                status: status.as_u16(),
                message: snippet(&text),
            }));
        }
        let parsed: ChatResponse = serde_json::from_str(&text).map_err(|e| {
            AttemptError::Fatal(LlmError::BadResponse(format!("{e} in body '{}'", snippet(&text))))
        })?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| {
            AttemptError::Fatal(LlmError::BadResponse("response has no choices".to_string()))
        })?;
        Ok(choice.message.content)
    }
}

fn snippet(text: &str) -> String {
    const LIMIT: usize = 200;
    let mut out: String = text.chars().take(LIMIT).collect();
    if text.chars().count() > LIMIT {
        out.push('…');
    }
    out
}

impl LlmBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let attempts = self.config.retry.attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match self.attempt(request) {
                Ok(reply) => return Ok(reply),
                Err(AttemptError::Fatal(e)) => return Err(e),
                Err(AttemptError::Transient(message)) => {
                    last = message;
                    if attempt + 1 < attempts {
                        thread::sleep(self.config.retry.delay_after(attempt));
                    }
                }
            }
        }
        Err(LlmError::Http { attempts, last })
    }
}
