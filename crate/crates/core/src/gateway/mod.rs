//! Uniform access to the decision-making backend.
//!
//! A [`ModelBackend`] answers three kinds of request: choosing the agent's
//! next action, expanding a workflow path text into a prompt, and
//! regenerating a workflow document from an edited prompt. Backends are
//! built per session from a [`BackendConfig`] so scripted call counters
//! never leak between sessions.

mod remote;
mod scripted;
mod tools;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use remote::{RemoteBackend, RemoteConfig};
pub use scripted::{ScriptEntry, ScriptedBackend};
pub use tools::{
    
    parse_reply, parse_tool_call, render_tool_call, tool_schemas_for, InvalidGraph, ParseFailure, ParseFailureCode,
    ParsedReply, Slot, SlotType, ToolCall, ToolSchema,
};

#[allow(unused_imports)]
pub(crate) use tools::schemas_for_graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageRole {
    System,
    User,
    Assistant,
    Tool,
}

/// What a history message records, beyond its role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageTag {
    UserQuery,
    UserResponse,
    UserAction,
    Observation,
    ActionResult,
    ModelCall,
    Corrective,
    Note,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: MessageRole,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<MessageTag>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Message {
    pub fn new(role: MessageRole, content: impl Into<String>) -> Self {
        Message {
            role,
            content: content.into(),
            tag: None,
            flags: Vec::new(),
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Message::new(MessageRole::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Message::new(MessageRole::User, content)
    }

    pub fn tagged(mut self, tag: MessageTag) -> Self {
        self.tag = Some(tag);
        self
    }

    pub fn flagged(mut self, flag: &str) -> Self {
        self.flags.push(flag.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Act,
    ExpandWorkflow,
    RegenerateWorkflow,
}

#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub purpose: Purpose,
    pub messages: &'a [Message],
    pub tools: &'a [ToolSchema],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub name: String,
    #[serde(default)]
    pub arguments: Value,
}

/// One backend reply. `raw` is the verbatim payload; `tool_call` is set
/// when the backend returned a structured call rather than text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelOutput {
    #[serde(default)]
    pub reasoning: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tool_call: Option<ToolInvocation>,
    #[serde(default)]
    pub raw: String,
}

impl ModelOutput {
    pub fn text(raw: impl Into<String>) -> Self {
        ModelOutput {
            reasoning: String::new(),
            description: String::new(),
            tool_call: None,
            raw: raw.into(),
        }
    }

    pub fn call(call: &ToolCall, reasoning: impl Into<String>) -> Self {
        ModelOutput {
            reasoning: reasoning.into(),
            description: String::new(),
            tool_call: Some(ToolInvocation {
                name: call.name().into(),
                arguments: call.arguments(),
            }),
            raw: render_tool_call(call),
        }
    }

    /// Turns this output into a type-checked call. Side fields found in the
    /// raw text fill in empty `reasoning`/`description`.
    pub fn to_reply(&self, tools: &[ToolSchema]) -> Result<ParsedReply, ParseFailure> {
        let mut reply = match &self.tool_call {
            Some(inv) => {
                let call = ToolCall::from_invocation(&inv.name, &inv.arguments, tools).map_err(|mut f| {
                    if !self.raw.is_empty() {
                        f.raw = self.raw.clone();
                    }
                    f
                })?;
                ParsedReply {
                    call,
                    reasoning: None,
                    description: None,
                }
            }
            None => parse_reply(&self.raw, tools)?,
        };
        if !self.reasoning.is_empty() {
            reply.reasoning = Some(self.reasoning.clone());
        }
        if !self.description.is_empty() {
            reply.description = Some(self.description.clone());
        }
        Ok(reply)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GatewayErrorCode {
    GatewayUnavailable,
    ScriptExhausted,
    InvalidConfig,
    InvalidContext,
}

impl GatewayErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            GatewayErrorCode::GatewayUnavailable => "GATEWAY_UNAVAILABLE",
            GatewayErrorCode::ScriptExhausted => "SCRIPT_EXHAUSTED",
            GatewayErrorCode::InvalidConfig => "INVALID_CONFIG",
            GatewayErrorCode::InvalidContext => "INVALID_CONTEXT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}: {message}", code.as_str())]
pub struct GatewayError {
    pub code: GatewayErrorCode,
    pub message: String,
}

impl GatewayError {
    pub fn new(code: GatewayErrorCode, message: impl Into<String>) -> Self {
        GatewayError {
            code,
            message: message.into(),
        }
    }
}

pub trait ModelBackend: Send {
    fn name(&self) -> &'static str;

    fn complete(&mut self, request: &CompletionRequest<'_>) -> Result<ModelOutput, GatewayError>;
}

fn check_context(request: &CompletionRequest<'_>) -> Result<(), GatewayError> {
    match request.messages.first() {
        Some(m) if m.role == MessageRole::System => Ok(()),
        Some(_) => Err(GatewayError::new(
            GatewayErrorCode::InvalidContext,
            "first context message must be the system prompt",
        )),
        None => Err(GatewayError::new(GatewayErrorCode::InvalidContext, "empty context")),
    }
}

/// Sends `request` after checking the context contract.
pub fn complete(backend: &mut dyn ModelBackend, request: &CompletionRequest<'_>) -> Result<ModelOutput, GatewayError> {
    check_context(request)?;
    backend.complete(request)
}

pub const EXPANSION_PREAMBLE: &str = "Follow this workflow when helping the user. \
Each numbered step is one thing you do, in order; a step that starts with \"when\" applies only under that condition.\n\n";
pub const EXPANSION_POSTAMBLE: &str = "\nIf the workflow has several paths, pick the one whose conditions match the situation.";

/// Marker that precedes the current workflow document in a regeneration request.
pub const CURRENT_DOCUMENT_MARKER: &str = "Current workflow document:\n";

/// Deterministic offline backend.
#[derive(Debug, Clone, Default)]
pub struct TemplateBackend;

impl ModelBackend for TemplateBackend {
    fn name(&self) -> &'static str {
        "template"
    }

    fn complete(&mut self, request: &CompletionRequest<'_>) -> Result<ModelOutput, GatewayError> {
        let last = request.messages.last().map(|m| m.content.as_str()).unwrap_or_default();
        Ok(match request.purpose {
            Purpose::Act => ModelOutput::call(
                &ToolCall::Finish {
                    summary: "No model configured; finishing immediately.".into(),
                },
                "",
            ),
            Purpose::ExpandWorkflow => ModelOutput::text(format!("{EXPANSION_PREAMBLE}{last}{EXPANSION_POSTAMBLE}")),
            Purpose::RegenerateWorkflow => {
                let doc = request
                    .messages
                    .iter()
                    .rev()
                    .find_map(|m| m.content.split_once(CURRENT_DOCUMENT_MARKER).map(|(_, d)| d))
                    .unwrap_or_default();
                ModelOutput::text(doc)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    /// Inline `script`, or a `script_path` to a JSON array of entries.
    Scripted {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        script: Option<Vec<ScriptEntry>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        script_path: Option<PathBuf>,
    },
    Template,
    Remote(RemoteConfig),
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig::Template
    }
}

impl BackendConfig {
    pub fn scripted(script: Vec<ScriptEntry>) -> Self {
        BackendConfig::Scripted {
            script: Some(script),
            script_path: None,
        }
    }

    /// Makes a relative `script_path` relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let BackendConfig::Scripted {
            script_path: Some(p), ..
        } = self
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self {
            BackendConfig::Scripted { script, script_path } => {
                if script.is_some() == script_path.is_some() {
                    return Err(GatewayError::new(
                        GatewayErrorCode::InvalidConfig,
                        "scripted backend needs exactly one of `script` or `script_path`",
                    ));
                }
                Ok(())
            }
            BackendConfig::Template => Ok(()),
            BackendConfig::Remote(r) => r.validate(),
        }
    }

    /// Builds a fresh backend instance.
    pub fn build(&self) -> Result<Box<dyn ModelBackend>, GatewayError> {
        self.validate()?;
        Ok(match self {
            BackendConfig::Scripted { script: Some(s), .. } => Box::new(ScriptedBackend::new(s.clone())),
            BackendConfig::Scripted {
                script_path: Some(p), ..
            } => Box::new(ScriptedBackend::load(p)?),
            BackendConfig::Scripted { .. } => unreachable!("validated above"),
            BackendConfig::Template => Box::new(TemplateBackend),
            BackendConfig::Remote(r) => Box::new(RemoteBackend::new(r.clone())?),
        })
    }
}
