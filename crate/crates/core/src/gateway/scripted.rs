use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    CompletionRequest, GatewayError, GatewayErrorCode, MessageRole, ModelBackend, ModelOutput,
    ToolCall,
};

/// One scripted reply. `match`, when present, must occur in the trailing
/// user/tool messages of the request (everything after the last assistant
/// message) for the entry to be eligible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    #[serde(rename = "match", default, skip_serializing_if = "Option::is_none")]
    pub matcher: Option<String>,
    pub output: ModelOutput,
}

impl ScriptEntry {
    pub fn call(call: ToolCall, reasoning: &str) -> Self {
        ScriptEntry {
            matcher: None,
            output: ModelOutput::call(&call, reasoning),
        }
    }

    pub fn text(raw: &str) -> Self {
        ScriptEntry {
            matcher: None,
            output: ModelOutput::text(raw),
        }
    }

    pub fn when(mut self, matcher: &str) -> Self {
        self.matcher = Some(matcher.to_string());
        self
    }

    pub fn described(mut self, description: &str) -> Self {
        self.output.description = description.to_string();
        self
    }
}

/// Replays a fixed script. Each call takes the first unconsumed entry
/// whose matcher accepts the request.
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    entries: Vec<ScriptEntry>,
    consumed: Vec<bool>,
    calls: usize,
}

impl ScriptedBackend {
    pub fn new(mut entries: Vec<ScriptEntry>) -> Self {
        for e in &mut entries {
            if e.output.raw.is_empty() {
                if let Some(inv) = &e.output.tool_call {
                    e.output.raw = crate::canonical::to_compact(&serde_json::json!({
                        "tool": inv.name,
                        "args": inv.arguments,
                    }));
                }
            }
        }
        let consumed = vec![false; entries.len()];
        ScriptedBackend {
            entries,
            consumed,
            calls: 0,
        }
    }

    pub fn parse(text: &str) -> Result<Self, GatewayError> {
        let entries: Vec<ScriptEntry> = serde_json::from_str(text)
            .map_err(|e| GatewayError::new(GatewayErrorCode::InvalidConfig, format!("script: {e}")))?;
        Ok(ScriptedBackend::new(entries))
    }

    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            GatewayError::new(
                GatewayErrorCode::InvalidConfig,
                format!("cannot read script {}: {e}", path.display()),
            )
        })?;
        ScriptedBackend::parse(&text)
    }

    /// Number of completions served so far.
    pub fn calls(&self) -> usize {
        self.calls
    }

    pub fn remaining(&self) -> usize {
        self.consumed.iter().filter(|c| !**c).count()
    }
}

fn trailing_input(request: &CompletionRequest<'_>) -> String {
    let tail: Vec<&str> = request
        .messages
        .iter()
        .rev()
        .take_while(|m| m.role != MessageRole::Assistant)
        .filter(|m| matches!(m.role, MessageRole::User | MessageRole::Tool))
        .map(|m| m.content.as_str())
        .collect();
    tail.into_iter().rev().collect::<Vec<_>>().join("\n")
}

impl ModelBackend for ScriptedBackend {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn complete(&mut self, request: &CompletionRequest<'_>) -> Result<ModelOutput, GatewayError> {
        let input = trailing_input(request);
        let pick = self.entries.iter().enumerate().position(|(i, e)| {
            !self.consumed[i] && e.matcher.as_deref().is_none_or(|m| input.contains(m))
        });
        match pick {
            Some(i) => {
                self.consumed[i] = true;
                self.calls += 1;
                Ok(self.entries[i].output.clone())
            }
            None => Err(GatewayError::new(
                GatewayErrorCode::ScriptExhausted,
                format!("no script entry left for call {}", self.calls),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Message, Purpose};

    fn req(msgs: &[Message]) -> CompletionRequest<'_> {
        CompletionRequest {
            purpose: Purpose::Act,
            messages: msgs,
            tools: &[],
        }
    }

    fn ask() -> ToolCall {
        ToolCall::AskOptions {
            question: "What type of coffee would you like?".into(),
            options: vec!["Latte".into(), "Cappuccino".into(), "Mocha".into()],
        }
    }

    #[test]
    fn returns_scripted_call_then_exhausts() {
        let mut b = ScriptedBackend::new(vec![ScriptEntry::call(ask(), "")]);
        let msgs = [Message::system("s"), Message::user("Order me a coffee please!")];
        let out = b.complete(&req(&msgs)).unwrap();
        assert_eq!(out.tool_call.unwrap().name, "ask_options");
        let err = b.complete(&req(&msgs)).unwrap_err();
        assert_eq!(err.code, GatewayErrorCode::ScriptExhausted);
    }

    #[test]
    fn matcher_selects_entry() {
        let mut b = ScriptedBackend::new(vec![
            ScriptEntry::text("after cappuccino").when("Cappuccino"),
            ScriptEntry::text("first"),
        ]);
        let msgs = [Message::system("s"), Message::user("hello")];
        assert_eq!(b.complete(&req(&msgs)).unwrap().raw, "first");
        let msgs = [Message::system("s"), Message::user("Cappuccino")];
        assert_eq!(b.complete(&req(&msgs)).unwrap().raw, "after cappuccino");
    }

    #[test]
    fn matcher_ignores_text_before_last_assistant() {
        let mut b = ScriptedBackend::new(vec![ScriptEntry::text("x").when("Cappuccino")]);
        let mut assistant = Message::user("{}");
        assistant.role = MessageRole::Assistant;
        let msgs = [Message::system("s"), Message::user("Cappuccino"), assistant, Message::user("page")];
        assert_eq!(b.complete(&req(&msgs)).unwrap_err().code, GatewayErrorCode::ScriptExhausted);
    }

    #[test]
    fn same_script_same_sequence() {
        let script = vec![ScriptEntry::call(ask(), "r"), ScriptEntry::text("a"), ScriptEntry::text("b")];
        let msgs = [Message::system("s"), Message::user("q")];
        let run = |s: Vec<ScriptEntry>| {
            let mut b = ScriptedBackend::new(s);
            (0..4).map(|_| b.complete(&req(&msgs))).collect::<Vec<_>>()
        };
        assert_eq!(run(script.clone()), run(script));
    }

    #[test]
    fn raw_filled_from_tool_call() {
        let text = r#"[{"output": {"tool_call": {"name": "click", "arguments": {"element": "menu-link"}}}}]"#;
        let mut b = ScriptedBackend::parse(text).unwrap();
        let msgs = [Message::system("s"), Message::user("q")];
        assert_eq!(
            b.complete(&req(&msgs)).unwrap().raw,
            r#"{"args":{"element":"menu-link"},"tool":"click"}"#
        );
    }
}
