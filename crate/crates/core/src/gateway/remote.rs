//! Chat-completions adapter.
//!
//! Request: `{model, messages: [{role, content}], tools: [{type: "function",
//! function: {name, description, parameters}}]}`. Tool role messages are sent
//! as `user` messages prefixed with `[environment]`. Every function also
//! accepts optional `reasoning` and `description` strings, which are split
//! back out of the returned arguments.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{
    CompletionRequest, GatewayError, GatewayErrorCode, MessageRole, ModelBackend, ModelOutput, Purpose,
    SlotType, ToolInvocation, ToolSchema,
};

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_retries() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Full URL of the chat-completions endpoint.
    pub endpoint: String,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub model: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
}

impl RemoteConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.endpoint.trim().is_empty() || self.api_key_env.trim().is_empty() {
            return Err(GatewayError::new(
                GatewayErrorCode::InvalidConfig,
                "remote backend requires `endpoint` and `api_key_env`",
            ));
        }
        Ok(())
    }
}

pub struct RemoteBackend {
    config: RemoteConfig,
    agent: ureq::Agent,
}

impl RemoteBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, GatewayError> {
        config.validate()?;
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .build()
            .into();
        Ok(RemoteBackend { config, agent })
    }

    fn request_body(&self, request: &CompletionRequest<'_>) -> Value {
        let messages: Vec<Value> = request
            .messages
            .iter()
            .map(|m| match m.role {
                MessageRole::System => json!({"role": "system", "content": m.content}),
                MessageRole::User => json!({"role": "user", "content": m.content}),
                MessageRole::Assistant => json!({"role": "assistant", "content": m.content}),
                MessageRole::Tool => json!({"role": "user", "content": format!("[environment] {}", m.content)}),
            })
            .collect();
        let mut body = json!({"model": self.config.model, "messages": messages});
        if request.purpose == Purpose::Act && !request.tools.is_empty() {
            body["tools"] = Value::Array(request.tools.iter().map(function_schema).collect());
        }
        body
    }

    fn round_trip(&self, body: &Value) -> Result<Value, String> {
        let key = std::env::var(&self.config.api_key_env)
            .map_err(|_| format!("environment variable `{}` is not set", self.config.api_key_env))?;
        let mut resp = self
            .agent
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(body)
            .map_err(|e| e.to_string())?;
        resp.body_mut().read_json::<Value>().map_err(|e| e.to_string())
    }
}

pub(crate) fn function_schema(tool: &ToolSchema) -> Value {
    let mut props = Map::new();
    let mut required = Vec::new();
    for slot in &tool.parameters {
        let ty = match &slot.ty {
            SlotType::Text | SlotType::ElementRef => json!({"type": "string"}),
            SlotType::Integer => json!({"type": "integer", "minimum": 0}),
            SlotType::Enum(values) => json!({"type": "string", "enum": values}),
            SlotType::TextList => json!({"type": "array", "items": {"type": "string"}}),
        };
        let mut ty = ty;
        ty["description"] = Value::String(slot.description.clone());
        props.insert(slot.name.clone(), ty);
        if slot.required {
            required.push(Value::String(slot.name.clone()));
        }
    }
    for side in ["reasoning", "description"] {
        props.insert(side.into(), json!({"type": "string"}));
    }
    json!({
        "type": "function",
        "function": {
            "name": tool.name,
            "description": tool.description,
            "parameters": {"type": "object", "properties": props, "required": required},
        }
    })
}

fn output_from_response(resp: &Value) -> Result<ModelOutput, String> {
    let message = resp
        .pointer("/choices/0/message")
        .ok_or_else(|| "response has no choices[0].message".to_string())?;
    let content = message.get("content").and_then(Value::as_str).unwrap_or_default().to_string();
    let Some(function) = message.pointer("/tool_calls/0/function") else {
        return Ok(ModelOutput::text(content));
    };
    let name = function.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
    let mut args = match function.get("arguments") {
        Some(Value::String(s)) => serde_json::from_str::<Value>(s).unwrap_or(Value::String(s.clone())),
        Some(v) => v.clone(),
        None => Value::Object(Map::new()),
    };
    let mut take = |k: &str| match args.as_object_mut().and_then(|m| m.remove(k)) {
        Some(Value::String(s)) => s,
        _ => String::new(),
    };
    let reasoning = take("reasoning");
    let description = take("description");
    Ok(ModelOutput {
        reasoning: if reasoning.is_empty() { content } else { reasoning },
        description,
        tool_call: Some(ToolInvocation { name, arguments: args }),
        raw: crate::canonical::to_compact(message),
    })
}

impl ModelBackend for RemoteBackend {
    fn name(&self) -> &'static str {
        "remote"
    }

    fn complete(&mut self, request: &CompletionRequest<'_>) -> Result<ModelOutput, GatewayError> {
        let body = self.request_body(request);
        let mut last = String::new();
        for _ in 0..=self.config.retries {
            match self.round_trip(&body).and_then(|v| output_from_response(&v)) {
                Ok(out) => return Ok(out),
                Err(e) => last = e,
            }
        }
        Err(GatewayError::new(GatewayErrorCode::GatewayUnavailable, last))
    }
}
