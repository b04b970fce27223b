//! Brute-force path oracle and the exhaustive small-graph family.
//!
//! The oracle lists every ordering of every subset of edges, keeps the
//! sequences that form a walk from Start which cannot be extended by an
//! unused edge, and sorts them by edge declaration index.

#![allow(dead_code)]

use flowbench::workflow::{EdgeCondition, Node, NodeSpec, UiActionsDisplay, WorkflowGraph};

pub struct OracleResult {
    /// Edge id sequences, sorted by declaration index.
    pub paths: Vec<Vec<String>>,
    pub truncated: bool,
}

fn permutations(n: usize, prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
    out.push(prefix.clone());
    for i in 0..n {
        if !used[i] {
            used[i] = true;
            prefix.push(i);
            permutations(n, prefix, used, out);
            prefix.pop();
            used[i] = false;
        }
    }
}

pub fn oracle(graph: &WorkflowGraph) -> OracleResult {
    let start = graph.start().expect("start").id.clone();
    let n = graph.edges.len();
    let mut all = Vec::new();
    permutations(n, &mut Vec::new(), &mut vec![false; n], &mut all);
    let mut keep: Vec<Vec<usize>> = Vec::new();
    let mut truncated = false;
    for seq in all {
        let mut at = start.as_str();
        let mut ok = true;
        for &e in &seq {
            if graph.edges[e].from != at {
                ok = false;
                break;
            }
            at = graph.edges[e].to.as_str();
        }
        if !ok {
            continue;
        }
        let outgoing: Vec<usize> = (0..n).filter(|&e| graph.edges[e].from == at).collect();
        if outgoing.iter().any(|e| !seq.contains(e)) {
            continue;
        }
        if !outgoing.is_empty() {
            truncated = true;
        }
        keep.push(seq);
    }
    keep.sort();
    OracleResult {
        paths: keep
            .into_iter()
            .map(|s| s.into_iter().map(|e| graph.edges[e].id.clone()).collect())
            .collect(),
        truncated,
    }
}

fn ui() -> NodeSpec {
    NodeSpec::UiActions(UiActionsDisplay::SILENT)
}

fn base(name: &str, nodes: Vec<(&str, NodeSpec)>, edges: &[(&str, &str)], mask: u32) -> WorkflowGraph {
    let mut g = WorkflowGraph::new(format!("{name}-{mask:03}"), name);
    for (id, spec) in nodes {
        g = g.with_node(Node::new(id, spec));
    }
    for (i, (from, to)) in edges.iter().enumerate() {
        if mask & (1 << i) != 0 {
            g = g.connect(from, to, EdgeCondition::Always);
        }
    }
    g
}

/// Every edge subset of four small base graphs: 656 graphs with at most 8
/// edges, valid and invalid alike.
pub fn family() -> Vec<WorkflowGraph> {
    let mut out = Vec::new();
    let ui_msg = [("S", "A"), ("S", "B"), ("A", "A"), ("A", "B"), ("B", "A"), ("A", "E"), ("B", "E"), ("S", "E")];
    let ui_ui = [("S", "A"), ("S", "B"), ("A", "A"), ("A", "B"), ("B", "A"), ("B", "B"), ("A", "E"), ("B", "E")];
    let plan_msg = [("S", "P"), ("S", "M"), ("P", "M"), ("M", "P"), ("P", "E"), ("M", "E"), ("S", "E")];
    let single = [("S", "U"), ("U", "U"), ("U", "E"), ("S", "E")];
    for mask in 0..(1u32 << ui_msg.len()) {
        out.push(base(
            "ui-message",
            vec![("S", NodeSpec::Start), ("A", ui()), ("B", NodeSpec::Message), ("E", NodeSpec::End)],
            &ui_msg,
            mask,
        ));
    }
    for mask in 0..(1u32 << ui_ui.len()) {
        out.push(base(
            "ui-ui",
            vec![("S", NodeSpec::Start), ("A", ui()), ("B", ui()), ("E", NodeSpec::End)],
            &ui_ui,
            mask,
        ));
    }
    for mask in 0..(1u32 << plan_msg.len()) {
        out.push(base(
            "plan-message",
            vec![("S", NodeSpec::Start), ("P", NodeSpec::Plan), ("M", NodeSpec::Message), ("E", NodeSpec::End)],
            &plan_msg,
            mask,
        ));
    }
    for mask in 0..(1u32 << single.len()) {
        out.push(base(
            "single-ui",
            vec![("S", NodeSpec::Start), ("U", ui()), ("E", NodeSpec::End)],
            &single,
            mask,
        ));
    }
    out
}
