use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use serde::Serialize;

use super::{EdgeCondition, NodeKind, WorkflowGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum IssueCode {
    // errors
    MissingStart,
    DuplicateStart,
    MissingEnd,
    DuplicateNodeId,
    DuplicateEdgeId,
    DanglingEdge,
    StartHasIncoming,
    EndHasOutgoing,
    IllegalSelfLoop,
    InvalidCustomCondition,
    // warnings
    UnreachableNode,
    AmbiguousBranch,
}

impl IssueCode {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueCode::MissingStart => "MISSING_START",
            IssueCode::DuplicateStart => "DUPLICATE_START",
            IssueCode::MissingEnd => "MISSING_END",
            IssueCode::DuplicateNodeId => "DUPLICATE_NODE_ID",
            IssueCode::DuplicateEdgeId => "DUPLICATE_EDGE_ID",
            IssueCode::DanglingEdge => "DANGLING_EDGE",
            IssueCode::StartHasIncoming => "START_HAS_INCOMING",
            IssueCode::EndHasOutgoing => "END_HAS_OUTGOING",
            IssueCode::IllegalSelfLoop => "ILLEGAL_SELF_LOOP",
            IssueCode::InvalidCustomCondition => "INVALID_CUSTOM_CONDITION",
            IssueCode::UnreachableNode => "UNREACHABLE_NODE",
            IssueCode::AmbiguousBranch => "AMBIGUOUS_BRANCH",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Issue {
    /// Node or edge id the issue is about; empty for graph-level issues.
    pub subject: String,
    pub code: IssueCode,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Issue>,
    pub warnings: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_executable(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty() && self.warnings.is_empty()
    }

    /// One line per issue: `error <CODE> <subject>: <message>`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (level, list) in [("error", &self.errors), ("warning", &self.warnings)] {
            for issue in list {
                out.push_str(&format!(
                    "{level} {} {}: {}\n",
                    issue.code.as_str(),
                    if issue.subject.is_empty() { "-" } else { &issue.subject },
                    issue.message
                ));
            }
        }
        out
    }
}

/// Checks the structural invariants of a workflow graph.
///
/// Violations are reported as data. Issues are sorted by (subject id, code)
/// so the report is byte-stable for equal inputs.
pub fn validate(graph: &WorkflowGraph) -> ValidationReport {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let push = |list: &mut Vec<Issue>, subject: &str, code: IssueCode, message: String| {
        list.push(Issue {
            subject: subject.to_string(),
            code,
            message,
        })
    };

    let mut kinds: HashMap<&str, NodeKind> = HashMap::new();
    for node in &graph.nodes {
        if kinds.insert(&node.id, node.kind()).is_some() {
            push(
                &mut errors,
                &node.id,
                IssueCode::DuplicateNodeId,
                format!("node id `{}` is used more than once", node.id),
            );
        }
    }

    let starts: Vec<_> = graph
        .nodes
        .iter()
        .filter(|n| n.kind() == NodeKind::Start)
        .collect();
    match starts.as_slice() {
        [] => push(&mut errors, "", IssueCode::MissingStart, "graph has no Start node".into()),
        [_] => {}
        [first, rest @ ..] => {
            for extra in rest {
                push(
                    &mut errors,
                    &extra.id,
                    IssueCode::DuplicateStart,
                    format!("second Start node (first is `{}`)", first.id),
                );
            }
        }
    }
    if !graph.contains_kind(NodeKind::End) {
        push(&mut errors, "", IssueCode::MissingEnd, "graph has no End node".into());
    }

    let mut edge_ids = HashSet::new();
    for edge in &graph.edges {
        if !edge_ids.insert(edge.id.as_str()) {
            push(
                &mut errors,
                &edge.id,
                IssueCode::DuplicateEdgeId,
                format!("edge id `{}` is used more than once", edge.id),
            );
        }
        let from = kinds.get(edge.from.as_str()).copied();
        let to = kinds.get(edge.to.as_str()).copied();
        if from.is_none() || to.is_none() {
            let missing = if from.is_none() { &edge.from } else { &edge.to };
            push(
                &mut errors,
                &edge.id,
                IssueCode::DanglingEdge,
                format!("endpoint `{missing}` does not exist"),
            );
            continue;
        }
        if to == Some(NodeKind::Start) {
            push(
                &mut errors,
                &edge.id,
                IssueCode::StartHasIncoming,
                format!("edge into Start node `{}`", edge.to),
            );
        }
        if from == Some(NodeKind::End) {
            push(
                &mut errors,
                &edge.id,
                IssueCode::EndHasOutgoing,
                format!("edge out of End node `{}`", edge.from),
            );
        }
        if edge.from == edge.to && from != Some(NodeKind::UiActions) {
            push(
                &mut errors,
                &edge.id,
                IssueCode::IllegalSelfLoop,
                format!("self-loop on `{}`; only UI Actions may repeat", edge.from),
            );
        }
        if let EdgeCondition::Custom(text) = &edge.condition {
            if text.trim().is_empty() || text.contains(['\n', '\r']) {
                push(
                    &mut errors,
                    &edge.id,
                    IssueCode::InvalidCustomCondition,
                    "custom condition text must be non-empty and single-line".into(),
                );
            }
        }
    }

    if let Some(start) = starts.first() {
        let mut seen: HashSet<&str> = HashSet::from([start.id.as_str()]);
        let mut queue = VecDeque::from([start.id.as_str()]);
        while let Some(id) = queue.pop_front() {
            for edge in graph.outgoing(id) {
                if kinds.contains_key(edge.to.as_str()) && seen.insert(&edge.to) {
                    queue.push_back(&edge.to);
                }
            }
        }
        let mut reported = BTreeSet::new();
        for node in &graph.nodes {
            if !seen.contains(node.id.as_str())
                && node.kind() != NodeKind::Start
                && reported.insert(node.id.as_str())
            {
                push(
                    &mut warnings,
                    &node.id,
                    IssueCode::UnreachableNode,
                    format!("{} node `{}` is not reachable from Start", node.kind(), node.id),
                );
            }
        }
    }

    let mut always_out: HashMap<&str, usize> = HashMap::new();
    for edge in graph.edges.iter().filter(|e| e.condition.is_always()) {
        *always_out.entry(&edge.from).or_default() += 1;
    }
    let mut ambiguous: Vec<_> = always_out.into_iter().filter(|(_, n)| *n > 1).collect();
    ambiguous.sort();
    for (id, n) in ambiguous {
        push(
            &mut warnings,
            id,
            IssueCode::AmbiguousBranch,
            format!("{n} unconditional outgoing edges"),
        );
    }

    errors.sort();
    warnings.sort();
    ValidationReport { errors, warnings }
}
