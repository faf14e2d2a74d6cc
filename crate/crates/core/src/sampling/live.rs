use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, Sampler, SamplerError};

#[derive(Debug, Clone, PartialEq)]
pub struct LiveSamplerConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `http://localhost:8000/v1`.
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    pub max_output_tokens: u32,
    pub timeout: Duration,
}

impl LiveSamplerConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into(),
            model: model.into(),
            api_key: None,
            max_output_tokens: 24,
            timeout: Duration::from_secs(60),
        }
    }
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ResponseMessage,
}

#[derive(Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

/// Sampler backed by a chat-completion endpoint. One request per name: the
/// rendered prompt is sent as a single user message.
#[derive(Debug, Clone)]
pub struct ChatCompletionSampler {
    config: LiveSamplerConfig,
    client: reqwest::blocking::Client,
    endpoint: String,
}

impl ChatCompletionSampler {
    pub fn new(config: LiveSamplerConfig) -> Result<Self, SamplerError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| SamplerError::Rejected(format!("http client: {e}")))?;
        let endpoint = format!("{}/chat/completions", config.base_url.trim_end_matches('/'));
        Ok(Self {
            config,
            client,
            endpoint,
        })
    }
}

impl Sampler for ChatCompletionSampler {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, SamplerError> {
        let body = ChatRequest {
            model: &self.config.model,
            messages: [ChatMessage {
                role: "user",
                content: request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: self.config.max_output_tokens,
        };
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .map_err(|e| SamplerError::Transport(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(SamplerError::Transport(format!("HTTP {status}")));
        }
        if !status.is_success() {
            let text = resp.text().unwrap_or_default();
            return Err(SamplerError::Rejected(format!("HTTP {status}: {text}")));
        }
        let parsed: ChatResponse = resp
            .json()
            .map_err(|e| SamplerError::Rejected(format!("unreadable response: {e}")))?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content.unwrap_or_default())
            .ok_or_else(|| SamplerError::Rejected("response has no choices".into()))
    }

    fn retry_backoff(&self, attempt: u32) -> Duration {
        Duration::from_millis(250 * (1 << attempt.min(5)))
    }
}
