use serde::{Deserialize, Serialize};

use crate::compiler::enumerate_paths;
use crate::gateway::ToolCall;
use crate::trace::Trace;
use crate::workflow::{NodeKind, WorkflowGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    MissingNode,
    UnexpectedOrder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub code: FindingCode,
    /// Node id for `MISSING_NODE`.
    pub node: Option<String>,
    pub kind: Option<NodeKind>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConformanceReport {
    /// Node kinds exercised by the trace, in order, consecutive repeats merged.
    pub observed: Vec<NodeKind>,
    pub findings: Vec<Finding>,
}

impl ConformanceReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "observed: {}\n",
            self.observed.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(" -> ")
        );
        if self.findings.is_empty() {
            out.push_str("no findings\n");
        }
        for f in &self.findings {
            let code = match f.code {
                FindingCode::MissingNode => "MISSING_NODE",
                FindingCode::UnexpectedOrder => "UNEXPECTED_ORDER",
            };
            out.push_str(&format!("{code}: {}\n", f.message));
        }
        out
    }
}

/// Node kind a call exercises.
pub fn call_kind(call: &ToolCall) -> NodeKind {
    match call {
        ToolCall::ShowPlan { .. } => NodeKind::Plan,
        ToolCall::SendMessage { .. } => NodeKind::Message,
        ToolCall::AskOptions { .. } | ToolCall::AskFreeText { .. } => NodeKind::Interact,
        ToolCall::Confirm { .. } => NodeKind::Confirmation,
        ToolCall::Finish { .. } => NodeKind::End,
        _ => NodeKind::UiActions,
    }
}

fn dedup(kinds: impl IntoIterator<Item = NodeKind>) -> Vec<NodeKind> {
    let mut out: Vec<NodeKind> = Vec::new();
    for k in kinds {
        if out.last() != Some(&k) {
            out.push(k);
        }
    }
    out
}

fn is_subsequence(needle: &[NodeKind], hay: &[NodeKind]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Compares what the agent did with what the workflow asks for.
///
/// Reports each node whose kind never occurs in the trace (`MISSING_NODE`)
/// and, when the observed kind sequence fits no enumerated path,
/// `UNEXPECTED_ORDER`. Findings are advisory; the workflow only steers the
/// agent through its prompt.
pub fn conformance_check(trace: &Trace, graph: &WorkflowGraph) -> ConformanceReport {
    let calls: Vec<NodeKind> = trace
        .records
        .iter()
        .filter_map(|r| r.parsed_action.call())
        .map(call_kind)
        .collect();
    let observed = if trace.records.is_empty() {
        Vec::new()
    } else {
        dedup(std::iter::once(NodeKind::Start).chain(calls))
    };
    let mut findings = Vec::new();
    for node in &graph.nodes {
        if !observed.contains(&node.kind()) {
            findings.push(Finding {
                code: FindingCode::MissingNode,
                node: Some(node.id.clone()),
                kind: Some(node.kind()),
                message: format!("{} node `{}` was never exercised", node.kind().display_name(), node.id),
            });
        }
    }
    if observed.len() > 1 {
        if let Ok(paths) = enumerate_paths(graph) {
            let fits = paths.paths.iter().any(|p| {
                let kinds = dedup(p.nodes.iter().filter_map(|id| graph.node(id)).map(|n| n.kind()));
                is_subsequence(&observed, &kinds)
            });
            if !fits {
                findings.push(Finding {
                    code: FindingCode::UnexpectedOrder,
                    node: None,
                    kind: None,
                    message: format!(
                        "sequence {} follows no workflow path",
                        observed.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(" -> ")
                    ),
                });
            }
        }
    }
    ConformanceReport { observed, findings }
}
