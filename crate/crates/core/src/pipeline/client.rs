//! Chat-completion clients: a scripted mock and an OpenAI-compatible HTTP client.

use std::collections::VecDeque;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::disruption::toolbox::ToolSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

/// A tool invocation requested by the model. `arguments` is the raw JSON
/// text as sent, so malformed arguments can be reported back verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        Self::text(Role::System, text)
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self::text(Role::User, text)
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        Self::text(Role::Assistant, text)
    }

    pub fn assistant_calls(calls: Vec<ToolCall>) -> Self {
        ChatMessage {
            role: Role::Assistant,
            content: None,
            tool_calls: calls,
            tool_call_id: None,
        }
    }

    pub fn tool_result(call_id: impl Into<String>, content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::Tool,
            content: Some(content.into()),
            tool_calls: Vec::new(),
            tool_call_id: Some(call_id.into()),
        }
    }

    fn text(role: Role, text: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: Some(text.into()),
            tool_calls: Vec::new(),
            tool_call_id: None,
        }
    }

    fn to_openai(&self) -> Value {
        let mut m = json!({ "role": self.role, "content": self.content });
        if !self.tool_calls.is_empty() {
            m["tool_calls"] = self
                .tool_calls
                .iter()
                .map(|c| {
                    json!({
                        "id": c.id,
                        "type": "function",
                        "function": { "name": c.name, "arguments": c.arguments },
                    })
                })
                .collect();
        }
        if let Some(id) = &self.tool_call_id {
            m["tool_call_id"] = json!(id);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum ChatReply {
    Text(String),
    ToolCalls(Vec<ToolCall>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl std::ops::AddAssign for Usage {
    fn add_assign(&mut self, rhs: Usage) {
        self.prompt_tokens += rhs.prompt_tokens;
        self.completion_tokens += rhs.completion_tokens;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub reply: ChatReply,
    #[serde(default)]
    pub usage: Usage,
}

impl ChatTurn {
    pub fn text(text: impl Into<String>) -> Self {
        ChatTurn {
            reply: ChatReply::Text(text.into()),
            usage: Usage::default(),
        }
    }

    pub fn tool_call(id: impl Into<String>, name: impl Into<String>, arguments: &Value) -> Self {
        ChatTurn {
            reply: ChatReply::ToolCalls(vec![ToolCall {
                id: id.into(),
                name: name.into(),
                arguments: arguments.to_string(),
            }]),
            usage: Usage::default(),
        }
    }
}

/// One conversation turn against a chat model.
pub trait ModelClient {
    fn chat(&mut self, messages: &[ChatMessage], tools: &[ToolSpec]) -> Result<ChatTurn>;

    fn supports_tools(&self) -> bool;

    /// True for clients that talk to a real endpoint. Timing and token
    /// tallies are only reported for live clients.
    fn is_live(&self) -> bool {
        false
    }
}

/// A scripted turn: a reply, or a transport failure with the given message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptStep {
    Turn(ChatTurn),
    Fail { transport_error: String },
}

/// Replays a fixed sequence of turns. Running out of script is a transport error.
#[derive(Debug, Clone, Default)]
pub struct ScriptedClient {
    steps: VecDeque<ScriptStep>,
    pub seen: Vec<Vec<ChatMessage>>,
}

impl ScriptedClient {
    pub fn new(steps: impl IntoIterator<Item = ScriptStep>) -> Self {
        ScriptedClient {
            steps: steps.into_iter().collect(),
            seen: Vec::new(),
        }
    }

    pub fn from_turns(turns: impl IntoIterator<Item = ChatTurn>) -> Self {
        Self::new(turns.into_iter().map(ScriptStep::Turn))
    }

    pub fn push(&mut self, step: ScriptStep) {
        self.steps.push_back(step);
    }

    pub fn remaining(&self) -> usize {
        self.steps.len()
    }
}

impl ModelClient for ScriptedClient {
    fn chat(&mut self, messages: &[ChatMessage], _tools: &[ToolSpec]) -> Result<ChatTurn> {
        self.seen.push(messages.to_vec());
        match self.steps.pop_front() {
            Some(ScriptStep::Turn(t)) => Ok(t),
            Some(ScriptStep::Fail { transport_error }) => Err(Error::Transport(transport_error)),
            None => Err(Error::Transport("script exhausted".into())),
        }
    }

    fn supports_tools(&self) -> bool {
        true
    }
}

fn default_api_key_env() -> String {
    "OPENAI_API_KEY".to_string()
}

fn default_timeout() -> u64 {
    300
}

fn default_true() -> bool {
    true
}

/// Endpoint configuration. The API key itself is read from the environment
/// variable named by `api_key_env` and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default = "default_true")]
    pub supports_tools: bool,
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

pub struct HttpClient {
    config: ModelConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpClient {
    pub fn new(config: ModelConfig) -> Result<Self> {
        if config.endpoint.is_empty() || config.model.is_empty() {
            return Err(Error::Config("endpoint and model must be set".into()));
        }
        let api_key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        if api_key.is_none() {
            log::warn!(
                "{} is not set; sending requests without a bearer token",
                config.api_key_env
            );
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpClient {
            config,
            api_key,
            agent,
        })
    }

    fn request_body(&self, messages: &[ChatMessage], tools: &[ToolSpec]) -> Value {
        let mut body = json!({
            "model": self.config.model,
            "messages": messages.iter().map(ChatMessage::to_openai).collect::<Vec<_>>(),
        });
        if self.config.supports_tools && !tools.is_empty() {
            body["tools"] = tools.iter().map(ToolSpec::to_openai).collect();
        }
        if let Some(t) = self.config.temperature {
            body["temperature"] = json!(t);
        }
        body
    }
}

/// Extracts the first choice of a chat-completions response.
pub fn parse_completion(body: &Value) -> Result<ChatTurn> {
    let message = body
        .pointer("/choices/0/message")
        .ok_or_else(|| Error::Transport(format!("response has no choices: {body}")))?;
    let usage = Usage {
        prompt_tokens: body
            .pointer("/usage/prompt_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
        completion_tokens: body
            .pointer("/usage/completion_tokens")
            .and_then(Value::as_u64)
            .unwrap_or(0),
    };
    let calls: Vec<ToolCall> = message
        .get("tool_calls")
        .and_then(Value::as_array)
        .map(|calls| {
            calls
                .iter()
                .map(|c| {
                    let arguments = match c.pointer("/function/arguments") {
                        Some(Value::String(s)) => s.clone(),
                        Some(other) => other.to_string(),
                        None => String::new(),
                    };
                    ToolCall {
                        id: c
                            .get("id")
                            .and_then(Value::as_str)
                            .unwrap_or_default()
                            .to_string(),
                        name: c
                            .pointer("/function/name")
                            .and_then(Value::as_str)
                            .unwrap_or_default()
                            .to_string(),
                        arguments,
                    }
                })
                .collect()
        })
        .unwrap_or_default();
    let reply = if calls.is_empty() {
        ChatReply::Text(
            message
                .get("content")
                .and_then(Value::as_str)
                .unwrap_or_default()
                .to_string(),
        )
    } else {
        ChatReply::ToolCalls(calls)
    };
    Ok(ChatTurn { reply, usage })
}

impl ModelClient for HttpClient {
    fn chat(&mut self, messages: &[ChatMessage], tools: &[ToolSpec]) -> Result<ChatTurn> {
        let body = self.request_body(messages, tools);
        let mut request = self.agent.post(&self.config.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("Authorization", format!("Bearer {key}"));
        }
        let mut response = request
            .send_json(&body)
            .map_err(|e| Error::Transport(e.to_string()))?;
        let status = response.status();
        let value: Value = response
            .body_mut()
            .read_json()
            .map_err(|e| Error::Transport(format!("HTTP {status}: {e}")))?;
        if !status.is_success() {
            return Err(Error::Transport(format!("HTTP {status}: {value}")));
        }
        parse_completion(&value)
    }

    fn supports_tools(&self) -> bool {
        self.config.supports_tools
    }

    fn is_live(&self) -> bool {
        true
    }
}
