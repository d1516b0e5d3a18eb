//! OpenAI-compatible chat-completions client.
//!
//! POSTs to `{base_url}/chat/completions`. The credential is read from the
//! `QDAPS_LLM_API_KEY` environment variable unless supplied explicitly.

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::Deserialize;
use serde_json::json;

use super::{BackendError, ChatBackend, LlmRequest, Role};

/// Environment variable holding the API credential.
pub const API_KEY_ENV: &str = "QDAPS_LLM_API_KEY";
/// Environment variable holding the endpoint base URL.
pub const BASE_URL_ENV: &str = "QDAPS_LLM_BASE_URL";

pub struct HttpBackend {
    base_url: String,
    api_key: Option<String>,
    client: Client,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: AssistantMessage,
}

#[derive(Deserialize)]
struct AssistantMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            client: Client::new(),
        }
    }

    /// Build from `QDAPS_LLM_BASE_URL` and `QDAPS_LLM_API_KEY`.
    pub fn from_env() -> Result<Self, String> {
        let base_url = std::env::var(BASE_URL_ENV)
            .map_err(|_| format!("{BASE_URL_ENV} not set; no endpoint configured"))?;
        let api_key = std::env::var(API_KEY_ENV).ok();
        Ok(Self::new(base_url, api_key))
    }

    fn body(request: &LlmRequest) -> serde_json::Value {
        let mut messages = Vec::with_capacity(request.messages.len() + 1);
        if let Some(system) = &request.system {
            messages.push(json!({"role": "system", "content": system}));
        }
        for m in &request.messages {
            let role = match m.role {
                Role::User => "user",
                Role::Assistant => "assistant",
            };
            messages.push(json!({"role": role, "content": m.content}));
        }
        json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        })
    }
}

impl ChatBackend for HttpBackend {
    fn complete(&self, request: &LlmRequest) -> Result<String, BackendError> {
        let url = format!("{}/chat/completions", self.base_url);
        let mut builder = self.client.post(&url).json(&Self::body(request));
        if let Some(key) = &self.api_key {
            builder = builder.bearer_auth(key);
        }
        let response = builder
            .send()
            .map_err(|e| BackendError::Retryable(format!("request to {url} failed: {e}")))?;

        let status = response.status();
        if status == StatusCode::UNAUTHORIZED || status == StatusCode::FORBIDDEN {
            return Err(BackendError::Auth(format!("HTTP {status}")));
        }
        if status == StatusCode::TOO_MANY_REQUESTS
            || status == StatusCode::REQUEST_TIMEOUT
            || status.is_server_error()
        {
            return Err(BackendError::Retryable(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(BackendError::Fatal(format!("HTTP {status}")));
        }

        let parsed: ChatResponse = response
            .json()
            .map_err(|e| BackendError::Fatal(format!("malformed completion response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| BackendError::Fatal("completion response had no choices".into()))
    }

    fn name(&self) -> &str {
        "http"
    }
}
