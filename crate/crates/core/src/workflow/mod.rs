//! Agent-experience workflow graphs.
//!
//! A [`WorkflowGraph`] is a directed graph whose nodes are the things an
//! interface agent can do (act on the page, show a plan, message, ask,
//! confirm) and whose edges carry the condition under which the agent should
//! move along them. Graphs are plain values: editing produces a new revision.

mod diff;
mod document;
mod validate;

pub use diff::{structural_diff, DiffReport, EdgeChange, NodeChange};
pub use document::{deserialize, from_value, serialize, to_value, DocError, DocErrorCode, DocPosition};
pub use validate::{validate, Issue, IssueCode, ValidationReport};

use serde::{Deserialize, Serialize};

/// Which parts of a UI action are shown to the user while the agent runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct UiActionsDisplay {
    pub show_action_name: bool,
    pub show_description: bool,
    pub show_reasoning: bool,
    pub page_preview: bool,
}

impl UiActionsDisplay {
    pub const SILENT: UiActionsDisplay = UiActionsDisplay {
        show_action_name: false,
        show_description: false,
        show_reasoning: false,
        page_preview: false,
    };

    /// All 16 combinations, in bit order (name = bit 0 ... preview = bit 3).
    pub fn all_combinations() -> impl Iterator<Item = UiActionsDisplay> {
        (0u8..16).map(|bits| UiActionsDisplay {
            show_action_name: bits & 1 != 0,
            show_description: bits & 2 != 0,
            show_reasoning: bits & 4 != 0,
            page_preview: bits & 8 != 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractMode {
    OptionsDropdown,
    FreeText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InteractConfig {
    pub mode: InteractMode,
}

/// Node kind together with its kind-specific configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeSpec {
    Start,
    End,
    UiActions(UiActionsDisplay),
    Plan,
    Message,
    Interact(InteractConfig),
    Confirmation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Start,
    End,
    UiActions,
    Plan,
    Message,
    Interact,
    Confirmation,
}

impl NodeKind {
    pub const ALL: [NodeKind; 7] = [
        NodeKind::Start,
        NodeKind::End,
        NodeKind::UiActions,
        NodeKind::Plan,
        NodeKind::Message,
        NodeKind::Interact,
        NodeKind::Confirmation,
    ];

    /// Identifier used in workflow documents.
    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Start => "start",
            NodeKind::End => "end",
            NodeKind::UiActions => "ui_actions",
            NodeKind::Plan => "plan",
            NodeKind::Message => "message",
            NodeKind::Interact => "interact",
            NodeKind::Confirmation => "confirmation",
        }
    }

    pub fn parse(s: &str) -> Option<NodeKind> {
        NodeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// Human-facing name, as shown on the canvas and in compiled prompts.
    pub fn display_name(self) -> &'static str {
        match self {
            NodeKind::Start => "Start",
            NodeKind::End => "End",
            NodeKind::UiActions => "UI Actions",
            NodeKind::Plan => "Plan",
            NodeKind::Message => "Message",
            NodeKind::Interact => "Interact",
            NodeKind::Confirmation => "Confirm",
        }
    }
}

impl std::fmt::Display for NodeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.display_name())
    }
}

impl NodeSpec {
    pub fn kind(&self) -> NodeKind {
        match self {
            NodeSpec::Start => NodeKind::Start,
            NodeSpec::End => NodeKind::End,
            NodeSpec::UiActions(_) => NodeKind::UiActions,
            NodeSpec::Plan => NodeKind::Plan,
            NodeSpec::Message => NodeKind::Message,
            NodeSpec::Interact(_) => NodeKind::Interact,
            NodeSpec::Confirmation => NodeKind::Confirmation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub spec: NodeSpec,
    pub label: Option<String>,
    /// Editor metadata (layout positions and the like). Stored opaquely and
    /// ignored by every engine operation except serialization.
    pub meta: Option<serde_json::Value>,
}

impl Node {
    pub fn new(id: impl Into<String>, spec: NodeSpec) -> Self {
        Node {
            id: id.into(),
            spec,
            label: None,
            meta: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn kind(&self) -> NodeKind {
        self.spec.kind()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum EdgeCondition {
    #[default]
    Always,
    Error,
    Risk,
    MissingInfo,
    Custom(String),
}

impl EdgeCondition {
    pub fn custom(text: impl Into<String>) -> Self {
        EdgeCondition::Custom(text.into())
    }

    pub fn is_always(&self) -> bool {
        matches!(self, EdgeCondition::Always)
    }

    /// Short name used in diffs and reports.
    pub fn name(&self) -> &str {
        match self {
            EdgeCondition::Always => "always",
            EdgeCondition::Error => "error",
            EdgeCondition::Risk => "risk",
            EdgeCondition::MissingInfo => "missing_info",
            EdgeCondition::Custom(text) => text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub from: String,
    pub to: String,
    pub condition: EdgeCondition,
}

impl Edge {
    pub fn new(id: impl Into<String>, from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge {
            id: id.into(),
            from: from.into(),
            to: to.into(),
            condition: EdgeCondition::Always,
        }
    }

    pub fn when(mut self, condition: EdgeCondition) -> Self {
        self.condition = condition;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowGraph {
    pub id: String,
    pub name: String,
    pub revision: u64,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
}

impl WorkflowGraph {
    pub fn new(id: impl Into<String>, name: impl Into<String>) -> Self {
        WorkflowGraph {
            id: id.into(),
            name: name.into(),
            revision: 0,
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn start(&self) -> Option<&Node> {
        self.nodes.iter().find(|n| n.kind() == NodeKind::Start)
    }

    /// Outgoing edges of `node_id` in declaration order.
    pub fn outgoing<'a>(&'a self, node_id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.from == node_id)
    }

    pub fn contains_kind(&self, kind: NodeKind) -> bool {
        self.nodes.iter().any(|n| n.kind() == kind)
    }

    /// Display settings of the first UI Actions node, if the graph has one.
    pub fn ui_actions_display(&self) -> Option<UiActionsDisplay> {
        self.nodes.iter().find_map(|n| match n.spec {
            NodeSpec::UiActions(cfg) => Some(cfg),
            _ => None,
        })
    }

    /// Convenience builder used by tests and examples.
    pub fn with_node(mut self, node: Node) -> Self {
        self.nodes.push(node);
        self
    }

    pub fn with_edge(mut self, edge: Edge) -> Self {
        self.edges.push(edge);
        self
    }

    /// Appends an edge with the first free generated id `e<n>`, counting from 1.
    pub fn connect(mut self, from: &str, to: &str, condition: EdgeCondition) -> Self {
        let id = (self.edges.len() + 1..)
            .map(|n| format!("e{n}"))
            .find(|id| self.edges.iter().all(|e| &e.id != id))
            .expect("unbounded range");
        self.edges.push(Edge::new(id, from, to).when(condition));
        self
    }
}
