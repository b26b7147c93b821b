//! Language-model backends: a scripted oracle for tests, transcript replay,
//! and a live HTTP chat-completions client, plus transcript recording.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod http;
pub mod replay;
pub mod scripted;

pub use http::{HttpBackend, HttpConfig, RetryPolicy};
pub use replay::{RecordingBackend, ReplayBackend, Transcript, TranscriptEntry};
pub use scripted::{OracleRule, RuleMatcher, ScriptedBackend};

/// Sampling parameters carried with every completion request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionParams {
    pub model_name: String,
    pub temperature: f64,
    pub max_reply_tokens: u32,
}

impl Default for CompletionParams {
    fn default() -> Self {
        CompletionParams {
            model_name: "default".to_string(),
            temperature: 0.0,
            max_reply_tokens: 64,
        }
    }
}

/// One prompt ready to send, with its sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub params: CompletionParams,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, params: &CompletionParams) -> Result<Self, LlmError> {
        let prompt = prompt.into();
        if prompt.is_empty() {
            return Err(LlmError::InvalidRequest("prompt must not be empty".to_string()));
        }
        if !(0.0..=2.0).contains(&params.temperature) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature {} is outside [0, 2]",
                params.temperature
            )));
        }
        Ok(CompletionRequest { prompt, params: params.clone() })
    }
}

/// Backend failure.
#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid completion request: {0}")]
    InvalidRequest(String),
    #[error("no oracle rule matches the prompt (state digest {digest})")]
    NoMatchingRule { digest: String },
    #[error("transcript has no reply for prompt digest {digest}")]
    ReplayMiss { digest: String },
    #[error("request failed after {attempts} attempts: {last}")]
    Http { attempts: u32, last: String },
    #[error("API rejected the request with status {status}: {message}")]
    Api { status: u16, message: String },
    #[error("cannot interpret API response: {0}")]
    BadResponse(String),
    #[error("rules file is invalid: {0}")]
    BadRules(String),
    #[error("transcript i/o failed")]
    Io(#[from] std::io::Error),
}

/// Anything that can answer a completion request.
///
/// Implementations must be deterministic given their own configuration for
/// replay to work; the HTTP backend delegates that responsibility to the
/// remote service.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError>;
}

impl LlmBackend for Box<dyn LlmBackend> {
    fn complete(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        (**self).complete(request)
    }
}

impl fmt::Display for CompletionParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} (temperature {}, max {} tokens)",
            self.model_name, self.temperature, self.max_reply_tokens
        )
    }
}
