use super::PathSet;
use crate::workflow::{EdgeCondition, InteractMode, Node, NodeKind, NodeSpec, WorkflowGraph};

/// Fixed phrase for what the agent does at a node.
pub fn node_phrase(spec: &NodeSpec) -> &'static str {
    match spec {
        NodeSpec::Start => "receive the user's task",
        NodeSpec::End => "finish the task",
        NodeSpec::UiActions(_) => "perform UI actions on the web page (click, scroll, type, navigate)",
        NodeSpec::Plan => "show the user a plan of the high-level steps you will take",
        NodeSpec::Message => "send a message to the user",
        NodeSpec::Interact(c) => match c.mode {
            InteractMode::OptionsDropdown => "ask the user a question and offer a drop-down list of options to choose from",
            InteractMode::FreeText => "ask the user an open-ended question they answer in free text",
        },
        NodeSpec::Confirmation => "ask the user to confirm or reject before continuing",
    }
}

/// Wording of an edge condition, without the leading "when".
pub fn condition_phrase(condition: &EdgeCondition) -> Option<String> {
    match condition {
        EdgeCondition::Always => None,
        EdgeCondition::Error => Some("the agent encounters an error".into()),
        EdgeCondition::Risk => Some("the next action is risky".into()),
        EdgeCondition::MissingInfo => Some("information needed to proceed is missing".into()),
        EdgeCondition::Custom(text) => Some(text.clone()),
    }
}

/// The `[Kind]` marker ending every step line.
pub fn step_tag(kind: NodeKind) -> String {
    format!("[{}]", kind.display_name())
}

fn with_label(phrase: &str, node: &Node) -> String {
    match &node.label {
        Some(label) if !label.trim().is_empty() => format!("{phrase} ({})", label.trim()),
        _ => phrase.to_string(),
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Text form of a path set: one numbered step list per path.
///
/// ```text
/// 1. Receive the user's task. [Start]
/// 2. Next, ask the user ... [Interact]
/// 3. Next, when if_add_cart: ask the user to confirm ... [Confirm]
/// Finish the task. [End]
/// ```
///
/// Several paths get `Path k:` headers separated by blank lines.
pub fn render_workflow_text(paths: &PathSet, graph: &WorkflowGraph) -> String {
    let many = paths.paths.len() > 1;
    let mut blocks = Vec::new();
    for (k, path) in paths.paths.iter().enumerate() {
        let mut lines = Vec::new();
        if many {
            lines.push(format!("Path {}:", k + 1));
        }
        for (i, node_id) in path.nodes.iter().enumerate() {
            let Some(node) = graph.node(node_id) else { continue };
            let phrase = with_label(node_phrase(&node.spec), node);
            let tag = step_tag(node.kind());
            let condition = i
                .checked_sub(1)
                .and_then(|e| path.edges.get(e))
                .and_then(|id| graph.edges.iter().find(|e| &e.id == id))
                .and_then(|e| condition_phrase(&e.condition));
            let line = match (node.kind(), i, condition) {
                (NodeKind::End, _, None) => format!("{}. {tag}", capitalize(&phrase)),
                (NodeKind::End, _, Some(c)) => format!("When {c}: {phrase}. {tag}"),
                (_, 0, _) => format!("1. {}. {tag}", capitalize(&phrase)),
                (_, _, None) => format!("{}. Next, {phrase}. {tag}", i + 1),
                (_, _, Some(c)) => format!("{}. Next, when {c}: {phrase}. {tag}", i + 1),
            };
            lines.push(line);
        }
        blocks.push(lines.join("\n"));
    }
    let mut text = blocks.join("\n\n");
    text.push('\n');
    text
}
