//! Canonical JSON workflow documents.
//!
//! Layout (keys sorted at every level, two-space indentation, trailing
//! newline):
//!
//! ```text
//! {
//!   "edges": [{"condition": {"type": "custom", "text": "if_add_cart"}, "from": "a", "id": "e1", "to": "b"}],
//!   "id": "prototype-1",
//!   "name": "Prototype 1",
//!   "nodes": [{"config": null, "id": "start", "kind": "start", "label": null}],
//!   "revision": 0
//! }
//! ```
//!
//! Node and edge arrays keep declaration order; it is significant for path
//! enumeration.

use std::collections::HashSet;
use std::fmt;

use serde_json::{json, Map, Value};

use super::{
    Edge, EdgeCondition, InteractConfig, Node, NodeKind, NodeSpec, UiActionsDisplay, WorkflowGraph,
};
use crate::canonical;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocErrorCode {
    Syntax,
    MissingNodes,
    MissingField,
    UnknownNodeKind,
    InvalidConfig,
    InvalidCondition,
    DanglingEdge,
}

impl DocErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DocErrorCode::Syntax => "SYNTAX",
            DocErrorCode::MissingNodes => "MISSING_NODES",
            DocErrorCode::MissingField => "MISSING_FIELD",
            DocErrorCode::UnknownNodeKind => "UNKNOWN_NODE_KIND",
            DocErrorCode::InvalidConfig => "INVALID_CONFIG",
            DocErrorCode::InvalidCondition => "INVALID_CONDITION",
            DocErrorCode::DanglingEdge => "DANGLING_EDGE",
        }
    }
}

/// Where in the document a problem was found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DocPosition {
    /// 1-based line and column, for text-level errors.
    LineCol { line: usize, column: usize },
    /// JSON pointer into the parsed document, for structural errors.
    Pointer(String),
}

impl fmt::Display for DocPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocPosition::LineCol { line, column } => write!(f, "line {line}, column {column}"),
            DocPosition::Pointer(p) if p.is_empty() => f.write_str("document root"),
            DocPosition::Pointer(p) => f.write_str(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}: {message} (at {position})", code.as_str())]
pub struct DocError {
    pub code: DocErrorCode,
    pub message: String,
    pub position: DocPosition,
}

impl DocError {
    fn at(code: DocErrorCode, pointer: impl Into<String>, message: impl Into<String>) -> Self {
        DocError {
            code,
            message: message.into(),
            position: DocPosition::Pointer(pointer.into()),
        }
    }
}

fn node_to_value(node: &Node) -> Value {
    let config = match node.spec {
        NodeSpec::UiActions(cfg) => serde_json::to_value(cfg).expect("display config serializes"),
        NodeSpec::Interact(cfg) => serde_json::to_value(cfg).expect("interact config serializes"),
        _ => Value::Null,
    };
    let mut obj = Map::new();
    obj.insert("config".into(), config);
    obj.insert("id".into(), Value::String(node.id.clone()));
    obj.insert("kind".into(), Value::String(node.kind().as_str().into()));
    obj.insert(
        "label".into(),
        node.label.clone().map(Value::String).unwrap_or(Value::Null),
    );
    if let Some(meta) = &node.meta {
        obj.insert("meta".into(), meta.clone());
    }
    Value::Object(obj)
}

pub(crate) fn condition_to_value(condition: &EdgeCondition) -> Value {
    match condition {
        EdgeCondition::Always => json!({"type": "always"}),
        EdgeCondition::Error => json!({"type": "error"}),
        EdgeCondition::Risk => json!({"type": "risk"}),
        EdgeCondition::MissingInfo => json!({"type": "missing_info"}),
        EdgeCondition::Custom(text) => json!({"type": "custom", "text": text}),
    }
}

/// Document form of a graph as a JSON value (keys sorted).
pub fn to_value(graph: &WorkflowGraph) -> Value {
    let nodes: Vec<Value> = graph.nodes.iter().map(node_to_value).collect();
    let edges: Vec<Value> = graph
        .edges
        .iter()
        .map(|e| {
            json!({
                "condition": condition_to_value(&e.condition),
                "from": e.from,
                "id": e.id,
                "to": e.to,
            })
        })
        .collect();
    json!({
        "edges": edges,
        "id": graph.id,
        "name": graph.name,
        "nodes": nodes,
        "revision": graph.revision,
    })
}

/// Canonical document text. Equal graphs produce byte-identical output.
pub fn serialize(graph: &WorkflowGraph) -> String {
    canonical::to_pretty(&to_value(graph))
}

fn required_str<'a>(obj: &'a Map<String, Value>, key: &str, at: &str) -> Result<&'a str, DocError> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(DocError::at(
            DocErrorCode::MissingField,
            format!("{at}/{key}"),
            format!("field `{key}` must be a string"),
        )),
        None => Err(DocError::at(
            DocErrorCode::MissingField,
            at,
            format!("missing field `{key}`"),
        )),
    }
}

fn parse_node(value: &Value, at: &str) -> Result<Node, DocError> {
    let obj = value.as_object().ok_or_else(|| {
        DocError::at(DocErrorCode::MissingField, at, "node must be an object")
    })?;
    let id = required_str(obj, "id", at)?.to_string();
    let kind_str = required_str(obj, "kind", at)?;
    let kind = NodeKind::parse(kind_str).ok_or_else(|| {
        DocError::at(
            DocErrorCode::UnknownNodeKind,
            format!("{at}/kind"),
            format!("unknown node kind `{kind_str}`"),
        )
    })?;
    let label = match obj.get("label") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => {
            return Err(DocError::at(
                DocErrorCode::MissingField,
                format!("{at}/label"),
                "field `label` must be a string or null",
            ))
        }
    };
    let config = obj.get("config").unwrap_or(&Value::Null);
    let config_at = format!("{at}/config");
    let bad_config = |e: serde_json::Error| {
        DocError::at(
            DocErrorCode::InvalidConfig,
            config_at.clone(),
            format!("invalid {} config: {e}", kind.as_str()),
        )
    };
    let spec = match kind {
        NodeKind::UiActions => {
            if config.is_null() {
                return Err(DocError::at(
                    DocErrorCode::MissingField,
                    at,
                    "ui_actions node requires a display config",
                ));
            }
            NodeSpec::UiActions(
                serde_json::from_value::<StrictDisplay>(config.clone())
                    .map_err(bad_config)?
                    .into(),
            )
        }
        NodeKind::Interact => {
            if config.is_null() {
                return Err(DocError::at(
                    DocErrorCode::MissingField,
                    at,
                    "interact node requires a mode config",
                ));
            }
            NodeSpec::Interact(
                serde_json::from_value::<StrictInteract>(config.clone())
                    .map_err(bad_config)?
                    .into(),
            )
        }
        other => {
            if !config.is_null() {
                return Err(DocError::at(
                    DocErrorCode::InvalidConfig,
                    config_at,
                    format!("{} nodes carry no config", other.as_str()),
                ));
            }
            match other {
                NodeKind::Start => NodeSpec::Start,
                NodeKind::End => NodeSpec::End,
                NodeKind::Plan => NodeSpec::Plan,
                NodeKind::Message => NodeSpec::Message,
                NodeKind::Confirmation => NodeSpec::Confirmation,
                NodeKind::UiActions | NodeKind::Interact => unreachable!(),
            }
        }
    };
    Ok(Node {
        id,
        spec,
        label,
        meta: obj.get("meta").cloned(),
    })
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictDisplay {
    show_action_name: bool,
    show_description: bool,
    show_reasoning: bool,
    page_preview: bool,
}

impl From<StrictDisplay> for UiActionsDisplay {
    fn from(s: StrictDisplay) -> Self {
        UiActionsDisplay {
            show_action_name: s.show_action_name,
            show_description: s.show_description,
            show_reasoning: s.show_reasoning,
            page_preview: s.page_preview,
        }
    }
}

#[derive(serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct StrictInteract {
    mode: super::InteractMode,
}

impl From<StrictInteract> for InteractConfig {
    fn from(s: StrictInteract) -> Self {
        InteractConfig { mode: s.mode }
    }
}

pub(crate) fn parse_condition(value: Option<&Value>, at: &str) -> Result<EdgeCondition, DocError> {
    let Some(value) = value else {
        return Ok(EdgeCondition::Always);
    };
    let invalid = |msg: String| DocError::at(DocErrorCode::InvalidCondition, at, msg);
    let obj = value
        .as_object()
        .ok_or_else(|| invalid("condition must be an object".into()))?;
    let ty = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| invalid("condition requires a string `type`".into()))?;
    Ok(match ty {
        "always" => EdgeCondition::Always,
        "error" => EdgeCondition::Error,
        "risk" => EdgeCondition::Risk,
        "missing_info" => EdgeCondition::MissingInfo,
        "custom" => {
            let text = obj
                .get("text")
                .and_then(Value::as_str)
                .ok_or_else(|| invalid("custom condition requires `text`".into()))?;
            EdgeCondition::Custom(text.to_string())
        }
        other => return Err(invalid(format!("unknown condition type `{other}`"))),
    })
}

/// Parses a workflow document.
///
/// Structural checks that need the whole node set (dangling edge endpoints)
/// happen here; graph-level invariants are left to [`super::validate`].
pub fn deserialize(text: &str) -> Result<WorkflowGraph, DocError> {
    if text.trim().is_empty() {
        return Err(DocError::at(
            DocErrorCode::MissingNodes,
            "",
            "empty document has no nodes",
        ));
    }
    let value: Value = serde_json::from_str(text).map_err(|e| DocError {
        code: DocErrorCode::Syntax,
        message: e.to_string(),
        position: DocPosition::LineCol {
            line: e.line(),
            column: e.column(),
        },
    })?;
    from_value(&value)
}

pub fn from_value(value: &Value) -> Result<WorkflowGraph, DocError> {
    let root = value.as_object().ok_or_else(|| {
        DocError::at(DocErrorCode::MissingNodes, "", "document must be a JSON object")
    })?;
    let nodes_value = root.get("nodes").and_then(Value::as_array).ok_or_else(|| {
        DocError::at(DocErrorCode::MissingNodes, "", "document has no `nodes` array")
    })?;
    let id = required_str(root, "id", "")?.to_string();
    let name = match root.get("name") {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(_) => {
            return Err(DocError::at(
                DocErrorCode::MissingField,
                "/name",
                "field `name` must be a string",
            ))
        }
    };
    let revision = match root.get("revision") {
        None | Some(Value::Null) => 0,
        Some(v) => v.as_u64().ok_or_else(|| {
            DocError::at(
                DocErrorCode::MissingField,
                "/revision",
                "field `revision` must be a non-negative integer",
            )
        })?,
    };

    let nodes = nodes_value
        .iter()
        .enumerate()
        .map(|(i, v)| parse_node(v, &format!("/nodes/{i}")))
        .collect::<Result<Vec<_>, _>>()?;
    let known: HashSet<&str> = nodes.iter().map(|n| n.id.as_str()).collect();

    let edges_value = match root.get("edges") {
        None | Some(Value::Null) => &[][..],
        Some(Value::Array(a)) => a.as_slice(),
        Some(_) => {
            return Err(DocError::at(
                DocErrorCode::MissingField,
                "/edges",
                "field `edges` must be an array",
            ))
        }
    };
    let mut edges = Vec::with_capacity(edges_value.len());
    for (i, v) in edges_value.iter().enumerate() {
        let at = format!("/edges/{i}");
        let obj = v
            .as_object()
            .ok_or_else(|| DocError::at(DocErrorCode::MissingField, &at, "edge must be an object"))?;
        let edge_id = required_str(obj, "id", &at)?.to_string();
        let from = required_str(obj, "from", &at)?.to_string();
        let to = required_str(obj, "to", &at)?.to_string();
        for (field, endpoint) in [("from", &from), ("to", &to)] {
            if !known.contains(endpoint.as_str()) {
                return Err(DocError::at(
                    DocErrorCode::DanglingEdge,
                    format!("{at}/{field}"),
                    format!("edge `{edge_id}` references unknown node `{endpoint}`"),
                ));
            }
        }
        let condition = parse_condition(obj.get("condition"), &format!("{at}/condition"))?;
        edges.push(Edge {
            id: edge_id,
            from,
            to,
            condition,
        });
    }

    Ok(WorkflowGraph {
        id,
        name,
        revision,
        nodes,
        edges,
    })
}
