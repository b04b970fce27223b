//! Tool schemas offered to the model and typed tool calls parsed back.
//!
//! Calls travel as a single JSON object:
//!
//! ```text
//! {"tool": "click", "args": {"element": "add-to-cart"}, "reasoning": "...", "description": "..."}
//! ```
//!
//! `reasoning` and `description` are optional. `name`/`arguments` are
//! accepted as aliases of `tool`/`args`.

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::sim::{EnvAction, ScrollDirection};
use crate::workflow::{validate, InteractMode, NodeSpec, ValidationReport, WorkflowGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "values", rename_all = "snake_case")]
pub enum SlotType {
    Text,
    Integer,
    Enum(Vec<String>),
    TextList,
    ElementRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: SlotType,
    pub required: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSchema {
    pub name: String,
    pub description: String,
    pub parameters: Vec<Slot>,
}

fn slot(name: &str, ty: SlotType, description: &str) -> Slot {
    Slot {
        name: name.into(),
        ty,
        required: true,
        description: description.into(),
    }
}

fn tool(name: &str, description: &str, parameters: Vec<Slot>) -> ToolSchema {
    ToolSchema {
        name: name.into(),
        description: description.into(),
        parameters,
    }
}

fn environment_tools() -> Vec<ToolSchema> {
    vec![
        tool(
            "click",
            "Click a visible element on the page.",
            vec![slot("element", SlotType::ElementRef, "id of the element to click")],
        ),
        tool(
            "scroll",
            "Scroll the page up or down by a number of rows.",
            vec![
                slot("direction", SlotType::Enum(vec!["up".into(), "down".into()]), "scroll direction"),
                slot("amount", SlotType::Integer, "number of rows"),
            ],
        ),
        tool(
            "type",
            "Type text into an input or choose a value in a select.",
            vec![
                slot("element", SlotType::ElementRef, "id of the input or select"),
                slot("text", SlotType::Text, "text to enter"),
            ],
        ),
        tool(
            "navigate",
            "Go to a page of the site by url.",
            vec![slot("url", SlotType::Text, "page url, e.g. /menu")],
        ),
    ]
}

fn finish_tool() -> ToolSchema {
    let mut summary = slot("summary", SlotType::Text, "what was accomplished");
    summary.required = false;
    tool("finish", "End the task.", vec![summary])
}

/// Tools for an arbitrary graph, valid or not.
pub(crate) fn schemas_for_graph(graph: &WorkflowGraph) -> Vec<ToolSchema> {
    let mut tools = environment_tools();
    let has = |pred: &dyn Fn(&NodeSpec) -> bool| graph.nodes.iter().any(|n| pred(&n.spec));
    if has(&|s| matches!(s, NodeSpec::Plan)) {
        tools.push(tool(
            "show_plan",
            "Show the user a list of high-level steps you will take.",
            vec![slot("steps", SlotType::TextList, "ordered plan steps")],
        ));
    }
    if has(&|s| matches!(s, NodeSpec::Message)) {
        tools.push(tool(
            "send_message",
            "Send the user a chat message.",
            vec![slot("text", SlotType::Text, "message text")],
        ));
    }
    if has(&|s| matches!(s, NodeSpec::Interact(c) if c.mode == InteractMode::OptionsDropdown)) {
        tools.push(tool(
            "ask_options",
            "Ask the user a question answered by picking from a drop-down list.",
            vec![
                slot("question", SlotType::Text, "question to ask"),
                slot("options", SlotType::TextList, "choices to offer"),
            ],
        ));
    }
    if has(&|s| matches!(s, NodeSpec::Interact(c) if c.mode == InteractMode::FreeText)) {
        tools.push(tool(
            "ask_free_text",
            "Ask the user an open-ended question answered in a text field.",
            vec![slot("question", SlotType::Text, "question to ask")],
        ));
    }
    if has(&|s| matches!(s, NodeSpec::Confirmation)) {
        tools.push(tool(
            "confirm",
            "Ask the user to accept or reject before you proceed.",
            vec![slot("question", SlotType::Text, "what the user is confirming")],
        ));
    }
    tools.push(finish_tool());
    tools
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("INVALID_GRAPH: workflow has {} validation error(s)", .0.errors.len())]
pub struct InvalidGraph(pub ValidationReport);

impl InvalidGraph {
    /// Validates `graph`, failing when it has errors.
    pub fn check(graph: &WorkflowGraph) -> Result<(), InvalidGraph> {
        let report = validate(graph);
        if report.is_executable() {
            Ok(())
        } else {
            Err(InvalidGraph(report))
        }
    }
}

/// Tools offered for `graph`: the environment tools and `finish` always,
/// interaction tools only for node kinds the graph uses.
pub fn tool_schemas_for(graph: &WorkflowGraph) -> Result<Vec<ToolSchema>, InvalidGraph> {
    InvalidGraph::check(graph)?;
    Ok(schemas_for_graph(graph))
}

/// A type-checked tool call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tool", content = "args", rename_all = "snake_case")]
pub enum ToolCall {
    Click { element: String },
    Scroll { direction: ScrollDirection, amount: u32 },
    Type { element: String, text: String },
    Navigate { url: String },
    ShowPlan { steps: Vec<String> },
    SendMessage { text: String },
    AskOptions { question: String, options: Vec<String> },
    AskFreeText { question: String },
    Confirm { question: String },
    Finish { summary: String },
}

impl ToolCall {
    pub fn name(&self) -> &'static str {
        match self {
            ToolCall::Click { .. } => "click",
            ToolCall::Scroll { .. } => "scroll",
            ToolCall::Type { .. } => "type",
            ToolCall::Navigate { .. } => "navigate",
            ToolCall::ShowPlan { .. } => "show_plan",
            ToolCall::SendMessage { .. } => "send_message",
            ToolCall::AskOptions { .. } => "ask_options",
            ToolCall::AskFreeText { .. } => "ask_free_text",
            ToolCall::Confirm { .. } => "confirm",
            ToolCall::Finish { .. } => "finish",
        }
    }

    pub fn arguments(&self) -> Value {
        match self {
            ToolCall::Click { element } => json!({ "element": element }),
            ToolCall::Scroll { direction, amount } => json!({ "direction": direction, "amount": amount }),
            ToolCall::Type { element, text } => json!({ "element": element, "text": text }),
            ToolCall::Navigate { url } => json!({ "url": url }),
            ToolCall::ShowPlan { steps } => json!({ "steps": steps }),
            ToolCall::SendMessage { text } => json!({ "text": text }),
            ToolCall::AskOptions { question, options } => json!({ "question": question, "options": options }),
            ToolCall::AskFreeText { question } => json!({ "question": question }),
            ToolCall::Confirm { question } => json!({ "question": question }),
            ToolCall::Finish { summary } => json!({ "summary": summary }),
        }
    }

    /// The environment action this call performs, if any.
    pub fn env_action(&self) -> Option<EnvAction> {
        Some(match self.clone() {
            ToolCall::Click { element } => EnvAction::Click { element },
            ToolCall::Scroll { direction, amount } => EnvAction::Scroll { direction, amount },
            ToolCall::Type { element, text } => EnvAction::Type { element, text },
            ToolCall::Navigate { url } => EnvAction::Navigate { url },
            _ => return None,
        })
    }

    pub fn from_env_action(action: &EnvAction) -> ToolCall {
        match action.clone() {
            EnvAction::Click { element } => ToolCall::Click { element },
            EnvAction::Scroll { direction, amount } => ToolCall::Scroll { direction, amount },
            EnvAction::Type { element, text } => ToolCall::Type { element, text },
            EnvAction::Navigate { url } => ToolCall::Navigate { url },
        }
    }

    /// Type-checks a `{name, arguments}` pair against the offered tools.
    pub fn from_invocation(name: &str, arguments: &Value, tools: &[ToolSchema]) -> Result<ToolCall, ParseFailure> {
        let raw = || render_invocation(name, arguments);
        let schema = tools.iter().find(|t| t.name == name).ok_or_else(|| {
            ParseFailure::new(ParseFailureCode::UnknownTool, raw(), format!("tool `{name}` is not offered"))
        })?;
        let empty = Map::new();
        let args = match arguments {
            Value::Object(m) => m,
            Value::Null => &empty,
            _ => {
                return Err(ParseFailure::new(
                    ParseFailureCode::ArgumentTypeMismatch,
                    raw(),
                    "arguments must be an object",
                ))
            }
        };
        check_slots(schema, args).map_err(|m| ParseFailure::new(ParseFailureCode::ArgumentTypeMismatch, raw(), m))?;

        let text = |k: &str| args.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
        let list = |k: &str| -> Vec<String> {
            args.get(k)
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(Value::as_str).map(str::to_string).collect())
                .unwrap_or_default()
        };
        let call = match name {
            "click" => ToolCall::Click { element: text("element") },
            "scroll" => ToolCall::Scroll {
                direction: if text("direction") == "up" { ScrollDirection::Up } else { ScrollDirection::Down },
                amount: args["amount"].as_u64().unwrap_or_default() as u32,
            },
            "type" => ToolCall::Type { element: text("element"), text: text("text") },
            "navigate" => ToolCall::Navigate { url: text("url") },
            "show_plan" => ToolCall::ShowPlan { steps: list("steps") },
            "send_message" => ToolCall::SendMessage { text: text("text") },
            "ask_options" => ToolCall::AskOptions { question: text("question"), options: list("options") },
            "ask_free_text" => ToolCall::AskFreeText { question: text("question") },
            "confirm" => ToolCall::Confirm { question: text("question") },
            "finish" => ToolCall::Finish { summary: text("summary") },
            other => {
                return Err(ParseFailure::new(
                    ParseFailureCode::UnknownTool,
                    raw(),
                    format!("tool `{other}` has no call mapping"),
                ))
            }
        };
        match &call {
            ToolCall::AskOptions { options, .. } if options.is_empty() => Err(ParseFailure::new(
                ParseFailureCode::ArgumentTypeMismatch,
                raw(),
                "ask_options needs at least one option",
            )),
            ToolCall::ShowPlan { steps } if steps.is_empty() => Err(ParseFailure::new(
                ParseFailureCode::ArgumentTypeMismatch,
                raw(),
                "show_plan needs at least one step",
            )),
            _ => Ok(call),
        }
    }
}

/// Slot-by-slot type check of `args` against `schema`.
fn check_slots(schema: &ToolSchema, args: &Map<String, Value>) -> Result<(), String> {
    for key in args.keys() {
        if !schema.parameters.iter().any(|s| &s.name == key) {
            return Err(format!("`{}` has no parameter `{key}`", schema.name));
        }
    }
    for slot in &schema.parameters {
        let Some(v) = args.get(&slot.name) else {
            if slot.required {
                return Err(format!("`{}` is missing `{}`", schema.name, slot.name));
            }
            continue;
        };
        let ok = match &slot.ty {
            SlotType::Text => v.is_string(),
            SlotType::ElementRef => v.as_str().is_some_and(|s| !s.trim().is_empty()),
            SlotType::Integer => v.as_u64().is_some_and(|n| n <= u32::MAX as u64),
            SlotType::Enum(values) => v.as_str().is_some_and(|s| values.iter().any(|x| x == s)),
            SlotType::TextList => v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
        };
        if !ok {
            return Err(format!(
                "`{}.{}` expects {}",
                schema.name,
                slot.name,
                match &slot.ty {
                    SlotType::Text => "text".to_string(),
                    SlotType::ElementRef => "an element id".to_string(),
                    SlotType::Integer => "a non-negative integer".to_string(),
                    SlotType::Enum(values) => format!("one of {}", values.join("|")),
                    SlotType::TextList => "a list of text".to_string(),
                }
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParseFailureCode {
    UnknownTool,
    ArgumentTypeMismatch,
    NoCallFound,
}

impl ParseFailureCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ParseFailureCode::UnknownTool => "UNKNOWN_TOOL",
            ParseFailureCode::ArgumentTypeMismatch => "ARGUMENT_TYPE_MISMATCH",
            ParseFailureCode::NoCallFound => "NO_CALL_FOUND",
        }
    }
}

/// Model output that could not be turned into a call. Keeps the raw text
/// for the debug trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{}: {message}", code.as_str())]
pub struct ParseFailure {
    pub code: ParseFailureCode,
    pub raw: String,
    pub message: String,
}

impl ParseFailure {
    pub fn new(code: ParseFailureCode, raw: impl Into<String>, message: impl Into<String>) -> Self {
        ParseFailure {
            code,
            raw: raw.into(),
            message: message.into(),
        }
    }
}

fn render_invocation(name: &str, arguments: &Value) -> String {
    crate::canonical::to_compact(&json!({ "tool": name, "args": arguments }))
}

/// Canonical serialization of a call.
pub fn render_tool_call(call: &ToolCall) -> String {
    render_invocation(call.name(), &call.arguments())
}

/// A call found in free text, with the optional side fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedReply {
    pub call: ToolCall,
    pub reasoning: Option<String>,
    pub description: Option<String>,
}

/// Locates the first JSON object in `raw` that names a tool.
pub(crate) fn find_call_object(raw: &str) -> Option<Map<String, Value>> {
    for (i, _) in raw.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&raw[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(obj))) = stream.next() {
            if obj.get("tool").or_else(|| obj.get("name")).is_some_and(Value::is_string) {
                return Some(obj);
            }
        }
    }
    None
}

pub fn parse_reply(raw: &str, tools: &[ToolSchema]) -> Result<ParsedReply, ParseFailure> {
    let obj = find_call_object(raw).ok_or_else(|| {
        ParseFailure::new(ParseFailureCode::NoCallFound, raw, "no JSON tool call object found")
    })?;
    let name = obj.get("tool").or_else(|| obj.get("name")).and_then(Value::as_str).unwrap_or_default();
    let args = obj.get("args").or_else(|| obj.get("arguments")).cloned().unwrap_or(Value::Null);
    let call = ToolCall::from_invocation(name, &args, tools).map_err(|mut f| {
        f.raw = raw.to_string();
        f
    })?;
    let side = |k: &str| obj.get(k).and_then(Value::as_str).map(str::to_string);
    Ok(ParsedReply {
        call,
        reasoning: side("reasoning"),
        description: side("description"),
    })
}

/// Parses a single structured call out of raw model text.
pub fn parse_tool_call(raw: &str, tools: &[ToolSchema]) -> Result<ToolCall, ParseFailure> {
    parse_reply(raw, tools).map(|r| r.call)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::workflow::{InteractConfig, Node, NodeKind};

    fn names(tools: &[ToolSchema]) -> Vec<&str> {
        tools.iter().map(|t| t.name.as_str()).collect()
    }

    #[test]
    fn start_end_gets_environment_tools_only() {
        let tools = tool_schemas_for(&fixtures::start_end()).unwrap();
        assert_eq!(names(&tools), ["click", "scroll", "type", "navigate", "finish"]);
    }

    #[test]
    fn prototype_three_adds_interaction_tools() {
        let tools = tool_schemas_for(&fixtures::prototype_3()).unwrap();
        assert_eq!(
            names(&tools),
            ["click", "scroll", "type", "navigate", "send_message", "ask_options", "confirm", "finish"]
        );
    }

    #[test]
    fn interact_mode_selects_ask_tool() {
        let tools = tool_schemas_for(&fixtures::prototype_1()).unwrap();
        assert!(names(&tools).contains(&"ask_options"));
        assert!(!names(&tools).contains(&"ask_free_text"));
        let tools = tool_schemas_for(&fixtures::prototype_4()).unwrap();
        assert!(names(&tools).contains(&"ask_free_text"));
        assert!(!names(&tools).contains(&"ask_options"));
    }

    #[test]
    fn invalid_graph_rejected() {
        let g = fixtures::start_end().with_node(Node::new("s2", NodeSpec::Start));
        assert!(tool_schemas_for(&g).is_err());
    }

    #[test]
    fn names_are_unique() {
        for g in fixtures::golden_workflows() {
            let tools = tool_schemas_for(&g).unwrap();
            let mut n = names(&tools);
            n.sort();
            n.dedup();
            assert_eq!(n.len(), tools.len());
        }
    }

    #[test]
    fn adding_a_kind_never_removes_a_tool() {
        let base = fixtures::start_end();
        let before = schemas_for_graph(&base);
        for kind in NodeKind::ALL {
            let spec = match kind {
                NodeKind::UiActions => NodeSpec::UiActions(Default::default()),
                NodeKind::Interact => NodeSpec::Interact(InteractConfig { mode: InteractMode::FreeText }),
                NodeKind::Start => NodeSpec::Start,
                NodeKind::End => NodeSpec::End,
                NodeKind::Plan => NodeSpec::Plan,
                NodeKind::Message => NodeSpec::Message,
                NodeKind::Confirmation => NodeSpec::Confirmation,
            };
            let after = schemas_for_graph(&base.clone().with_node(Node::new("extra", spec)));
            for t in &before {
                assert!(after.contains(t), "{kind:?} removed {}", t.name);
            }
        }
    }

    #[test]
    fn parses_click() {
        let tools = schemas_for_graph(&fixtures::start_end());
        let call = parse_tool_call(r#"{"tool":"click","args":{"element":"btn-add-cart"}}"#, &tools).unwrap();
        assert_eq!(call, ToolCall::Click { element: "btn-add-cart".into() });
    }

    #[test]
    fn unknown_tool() {
        let tools = schemas_for_graph(&fixtures::start_end());
        let f = parse_tool_call(r#"{"tool":"fly"}"#, &tools).unwrap_err();
        assert_eq!(f.code, ParseFailureCode::UnknownTool);
        assert_eq!(f.raw, r#"{"tool":"fly"}"#);
    }

    #[test]
    fn missing_options_is_type_mismatch() {
        let tools = schemas_for_graph(&fixtures::prototype_1());
        let f = parse_tool_call(r#"{"tool":"ask_options","args":{"question":"Which?"}}"#, &tools).unwrap_err();
        assert_eq!(f.code, ParseFailureCode::ArgumentTypeMismatch);
        let f = parse_tool_call(r#"{"tool":"ask_options","args":{"question":"Which?","options":"Latte"}}"#, &tools)
            .unwrap_err();
        assert_eq!(f.code, ParseFailureCode::ArgumentTypeMismatch);
        let f = parse_tool_call(r#"{"tool":"ask_options","args":{"question":"Which?","options":[]}}"#, &tools)
            .unwrap_err();
        assert_eq!(f.code, ParseFailureCode::ArgumentTypeMismatch);
    }

    #[test]
    fn no_call_in_prose() {
        let tools = schemas_for_graph(&fixtures::start_end());
        let f = parse_tool_call("I think I should click the button.", &tools).unwrap_err();
        assert_eq!(f.code, ParseFailureCode::NoCallFound);
    }

    #[test]
    fn call_embedded_in_text_with_side_fields() {
        let tools = schemas_for_graph(&fixtures::start_end());
        let raw = "Sure.\n```json\n{\"tool\":\"scroll\",\"args\":{\"direction\":\"down\",\"amount\":30},\"reasoning\":\"not in view\"}\n```";
        let r = parse_reply(raw, &tools).unwrap();
        assert_eq!(r.call, ToolCall::Scroll { direction: ScrollDirection::Down, amount: 30 });
        assert_eq!(r.reasoning.as_deref(), Some("not in view"));
    }

    use proptest::prelude::*;

    fn text() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 \"{}\\\\é-]{0,12}"
    }

    fn any_call() -> impl Strategy<Value = ToolCall> {
        let id = "[a-z][a-z0-9-]{0,10}";
        prop_oneof![
            id.prop_map(|element| ToolCall::Click { element }),
            (any::<bool>(), any::<u32>()).prop_map(|(up, amount)| ToolCall::Scroll {
                direction: if up { ScrollDirection::Up } else { ScrollDirection::Down },
                amount
            }),
            (id, text()).prop_map(|(element, text)| ToolCall::Type { element, text }),
            text().prop_map(|url| ToolCall::Navigate { url }),
            prop::collection::vec(text(), 1..4).prop_map(|steps| ToolCall::ShowPlan { steps }),
            text().prop_map(|text| ToolCall::SendMessage { text }),
            (text(), prop::collection::vec(text(), 1..4))
                .prop_map(|(question, options)| ToolCall::AskOptions { question, options }),
            text().prop_map(|question| ToolCall::AskFreeText { question }),
            text().prop_map(|question| ToolCall::Confirm { question }),
            text().prop_map(|summary| ToolCall::Finish { summary }),
        ]
    }

    proptest! {
        #[test]
        fn render_then_parse_is_identity(call in any_call()) {
            let mut g = fixtures::prototype_3();
            g.nodes.push(Node::new("plan", NodeSpec::Plan));
            g.nodes.push(Node::new("free", NodeSpec::Interact(InteractConfig { mode: InteractMode::FreeText })));
            let tools = schemas_for_graph(&g);
            prop_assert_eq!(parse_tool_call(&render_tool_call(&call), &tools).unwrap(), call);
        }
    }
}
