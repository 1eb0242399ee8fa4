use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use structamp_core::predictors::prompt::Message;

use crate::LlmError;

/// Per-call model settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatParams {
    pub model: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
}

/// Assistant message of one completion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatReply {
    pub content: String,
    /// Separate reasoning channel, when the backend exposes one.
    pub reasoning: Option<String>,
}

#[derive(Debug)]
pub(crate) struct SendError {
    pub message: String,
    pub retryable: bool,
}

/// OpenAI-style chat-completion endpoint.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: reqwest::Client,
    endpoint: String,
    token: Option<String>,
}

impl HttpBackend {
    /// Reads the bearer token from `api_key_env`; an empty name means the
    /// endpoint needs no authentication.
    pub fn new(endpoint: &str, api_key_env: &str, timeout: Duration) -> Result<Self, LlmError> {
        let token = if api_key_env.is_empty() {
            None
        } else {
            Some(std::env::var(api_key_env).map_err(|_| LlmError::MissingApiKey(api_key_env.to_string()))?)
        };
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self { client, endpoint: endpoint.to_string(), token })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub(crate) async fn chat(&self, params: &ChatParams, messages: &[Message]) -> Result<ChatReply, SendError> {
        let mut body = json!({
            "model": params.model,
            "messages": messages,
            "temperature": params.temperature,
        });
        if let Some(m) = params.max_tokens {
            body["max_tokens"] = json!(m);
        }
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(t) = &self.token {
            req = req.bearer_auth(t);
        }
        let resp = req.send().await.map_err(|e| SendError { message: e.to_string(), retryable: true })?;
        let status = resp.status();
        if !status.is_success() {
            let text = resp.text().await.unwrap_or_default();
            return Err(SendError {
                message: format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()),
                retryable: status.is_server_error() || status.as_u16() == 429,
            });
        }
        let v: Value = resp.json().await.map_err(|e| SendError { message: format!("bad body: {e}"), retryable: true })?;
        parse_completion(&v).ok_or_else(|| SendError { message: "response has no choices[0].message".into(), retryable: false })
    }
}

fn parse_completion(v: &Value) -> Option<ChatReply> {
    let msg = v.get("choices")?.get(0)?.get("message")?;
    let content = msg.get("content").and_then(Value::as_str).unwrap_or_default().to_string();
    let reasoning = ["reasoning_content", "reasoning"]
        .iter()
        .find_map(|k| msg.get(*k).and_then(Value::as_str))
        .map(str::to_string);
    Some(ChatReply { content, reasoning })
}
