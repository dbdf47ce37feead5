//! Model gateways: the live chat-completions client and the scripted
//! responder used for offline runs.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use log::warn;
use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::clients::RetryPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ChatMessage {
    System { content: String },
    User { content: String },
    Assistant { content: String },
    ToolCall { id: String, name: String, arguments: Value },
    ToolResult { id: String, name: String, content: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    pub parameters: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelReply {
    ToolRequest { name: String, arguments: Value },
    FinalText(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GatewayError {
    #[error("model gateway unavailable: {0}")]
    Unavailable(String),
    #[error("scenario exhausted after {0} responses")]
    ScenarioExhausted(usize),
    #[error("scenario file {path}: {reason}")]
    Scenario { path: String, reason: String },
}

pub trait ModelGateway: Send + Sync {
    fn send(&self, conversation: &[ChatMessage], tools: &[ToolSpec]) -> Result<ModelReply, GatewayError>;
}

/// One scripted model response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioStep {
    Tool {
        name: String,
        #[serde(default)]
        arguments: Value,
    },
    Final {
        text: String,
    },
}

impl From<ScenarioStep> for ModelReply {
    fn from(s: ScenarioStep) -> Self {
        match s {
            ScenarioStep::Tool { name, arguments } => ModelReply::ToolRequest { name, arguments },
            ScenarioStep::Final { text } => ModelReply::FinalText(text),
        }
    }
}

pub fn load_scenario(path: &Path) -> Result<Vec<ScenarioStep>, GatewayError> {
    let err = |reason: String| GatewayError::Scenario {
        path: path.display().to_string(),
        reason,
    };
    let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| err(e.to_string()))
}

/// Replays a fixed list of responses, one per `send`.
#[derive(Debug)]
pub struct ScriptedGateway {
    steps: Mutex<VecDeque<ScenarioStep>>,
    total: usize,
}

impl ScriptedGateway {
    pub fn new(steps: Vec<ScenarioStep>) -> Self {
        Self {
            total: steps.len(),
            steps: Mutex::new(steps.into()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        load_scenario(path).map(Self::new)
    }

    pub fn remaining(&self) -> usize {
        self.steps.lock().unwrap_or_else(|p| p.into_inner()).len()
    }
}

impl ModelGateway for ScriptedGateway {
    fn send(&self, _: &[ChatMessage], _: &[ToolSpec]) -> Result<ModelReply, GatewayError> {
        self.steps
            .lock()
            .unwrap_or_else(|p| p.into_inner())
            .pop_front()
            .map(ModelReply::from)
            .ok_or(GatewayError::ScenarioExhausted(self.total))
    }
}

#[derive(Debug, Clone)]
pub struct LiveGatewayConfig {
    pub api_key: String,
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub retry: RetryPolicy,
}

impl LiveGatewayConfig {
    pub const API_KEY_VAR: &'static str = "LLM_API_KEY";

    /// Reads `LLM_API_KEY`, and optionally `LLM_BASE_URL` and `LLM_MODEL`.
    pub fn from_env() -> Option<Self> {
        let api_key = std::env::var(Self::API_KEY_VAR).ok().filter(|k| !k.trim().is_empty())?;
        Some(Self {
            api_key,
            base_url: std::env::var("LLM_BASE_URL").unwrap_or_else(|_| "https://api.openai.com/v1".into()),
            model: std::env::var("LLM_MODEL").unwrap_or_else(|_| "gpt-4-turbo".into()),
            temperature: 0.0,
            retry: RetryPolicy::default(),
        })
    }
}

/// OpenAI-style chat-completions gateway with function calling.
#[derive(Debug, Clone)]
pub struct LiveGateway {
    http: Client,
    cfg: LiveGatewayConfig,
}

impl LiveGateway {
    pub fn new(cfg: LiveGatewayConfig) -> Result<Self, GatewayError> {
        let http = Client::builder()
            .timeout(cfg.retry.timeout.max(Duration::from_secs(60)))
            .build()
            .map_err(|e| GatewayError::Unavailable(e.to_string()))?;
        Ok(Self { http, cfg })
    }

    fn request_body(&self, conversation: &[ChatMessage], tools: &[ToolSpec]) -> Value {
        let messages: Vec<Value> = conversation
            .iter()
            .map(|m| match m {
                ChatMessage::System { content } => json!({"role": "system", "content": content}),
                ChatMessage::User { content } => json!({"role": "user", "content": content}),
                ChatMessage::Assistant { content } => json!({"role": "assistant", "content": content}),
                ChatMessage::ToolCall { id, name, arguments } => json!({
                    "role": "assistant",
                    "content": null,
                    "tool_calls": [{
                        "id": id,
                        "type": "function",
                        "function": {"name": name, "arguments": arguments.to_string()},
                    }],
                }),
                ChatMessage::ToolResult { id, content, .. } => {
                    json!({"role": "tool", "tool_call_id": id, "content": content})
                }
            })
            .collect();
        let mut body = json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": messages,
        });
        if !tools.is_empty() {
            body["tools"] = tools
                .iter()
                .map(|t| {
                    json!({"type": "function", "function": {
                        "name": t.name, "description": t.description, "parameters": t.parameters,
                    }})
                })
                .collect();
        }
        body
    }
}

pub(crate) fn parse_completion(body: &Value) -> Result<ModelReply, GatewayError> {
    let msg = body
        .pointer("/choices/0/message")
        .ok_or_else(|| GatewayError::Unavailable("response has no choices".into()))?;
    if let Some(call) = msg.pointer("/tool_calls/0/function") {
        let name = call.get("name").and_then(Value::as_str).unwrap_or("").to_string();
        let raw = call.get("arguments").and_then(Value::as_str).unwrap_or("{}");
        let arguments = serde_json::from_str(raw).unwrap_or(Value::String(raw.to_string()));
        return Ok(ModelReply::ToolRequest { name, arguments });
    }
    let text = msg.get("content").and_then(Value::as_str).unwrap_or("");
    Ok(ModelReply::FinalText(text.to_string()))
}

impl ModelGateway for LiveGateway {
    fn send(&self, conversation: &[ChatMessage], tools: &[ToolSpec]) -> Result<ModelReply, GatewayError> {
        let body = self.request_body(conversation, tools);
        let url = format!("{}/chat/completions", self.cfg.base_url.trim_end_matches('/'));
        let mut backoff = self.cfg.retry.initial_backoff;
        let mut last = String::new();
        for attempt in 0..=self.cfg.retry.retries {
            if attempt > 0 {
                thread::sleep(backoff);
                backoff *= 2;
            }
            let resp = match self.http.post(&url).bearer_auth(&self.cfg.api_key).json(&body).send() {
                Ok(r) => r,
                Err(e) => {
                    last = e.to_string();
                    continue;
                }
            };
            let status = resp.status();
            if status.is_server_error() || status.as_u16() == 429 {
                last = format!("http {status}");
                warn!("model gateway: {last}");
                continue;
            }
            if !status.is_success() {
                return Err(GatewayError::Unavailable(format!("http {status}")));
            }
            let value: Value = resp.json().map_err(|e| GatewayError::Unavailable(e.to_string()))?;
            return parse_completion(&value);
        }
        Err(GatewayError::Unavailable(last))
    }
}
