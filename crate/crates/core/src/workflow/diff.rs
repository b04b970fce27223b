//! Structural comparison of two workflow graphs.
//!
//! Node ids are editor-assigned and carry no meaning, so nodes are matched
//! by kind, configuration, label and neighbourhood rather than by id. The
//! matcher searches for the node correspondence with the fewest diff
//! entries: refined-signature matching seeds it and pairwise swaps improve it.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use super::{EdgeCondition, NodeKind, NodeSpec, WorkflowGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeRef {
    pub id: String,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeChange {
    pub before: String,
    pub after: String,
    pub kind: String,
    pub label_changed: bool,
    pub config_changed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeRef {
    pub id: String,
    pub from: String,
    pub to: String,
    pub condition: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeChange {
    pub before: EdgeRef,
    pub after: EdgeRef,
}

impl EdgeChange {
    pub fn condition_changed(&self) -> bool {
        self.before.condition != self.after.condition
    }
}

/// Differences that turn graph `a` into graph `b`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub added_nodes: Vec<NodeRef>,
    pub removed_nodes: Vec<NodeRef>,
    pub changed_nodes: Vec<NodeChange>,
    pub added_edges: Vec<EdgeRef>,
    pub removed_edges: Vec<EdgeRef>,
    pub changed_edges: Vec<EdgeChange>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.added_nodes.len()
            + self.removed_nodes.len()
            + self.changed_nodes.len()
            + self.added_edges.len()
            + self.removed_edges.len()
            + self.changed_edges.len()
    }
}

fn base_sig(spec: &NodeSpec, label: &Option<String>) -> u64 {
    let mut h = DefaultHasher::new();
    spec.hash(&mut h);
    label.hash(&mut h);
    h.finish()
}

/// Weisfeiler-Lehman style refinement of node signatures over the edge
/// structure, `rounds` iterations.
fn refined_sigs(g: &WorkflowGraph, rounds: usize) -> Vec<u64> {
    let index: HashMap<&str, usize> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.id.as_str(), i))
        .collect();
    let mut sigs: Vec<u64> = g.nodes.iter().map(|n| base_sig(&n.spec, &n.label)).collect();
    for _ in 0..rounds {
        let mut neigh: Vec<Vec<(u8, &EdgeCondition, u64)>> = vec![Vec::new(); g.nodes.len()];
        for e in &g.edges {
            let (Some(&f), Some(&t)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) else {
                continue;
            };
            neigh[f].push((0, &e.condition, sigs[t]));
            neigh[t].push((1, &e.condition, sigs[f]));
        }
        sigs = sigs
            .iter()
            .zip(neigh.iter_mut())
            .map(|(s, list)| {
                list.sort();
                let mut h = DefaultHasher::new();
                s.hash(&mut h);
                list.hash(&mut h);
                h.finish()
            })
            .collect();
    }
    sigs
}

fn node_ref(g: &WorkflowGraph, i: usize) -> NodeRef {
    NodeRef {
        id: g.nodes[i].id.clone(),
        kind: g.nodes[i].kind().as_str().to_string(),
    }
}

fn edge_ref(e: &super::Edge) -> EdgeRef {
    EdgeRef {
        id: e.id.clone(),
        from: e.from.clone(),
        to: e.to.clone(),
        condition: e.condition.name().to_string(),
    }
}

/// Builds the report for a fixed node correspondence (`mapping[i]` is the
/// index in `b` matched to node `i` of `a`).
pub(crate) fn report_for(a: &WorkflowGraph, b: &WorkflowGraph, mapping: &[Option<usize>]) -> DiffReport {
    let mut report = DiffReport::default();
    let mut b_matched = vec![false; b.nodes.len()];
    for (i, m) in mapping.iter().enumerate() {
        match m {
            Some(j) => {
                b_matched[*j] = true;
                let (na, nb) = (&a.nodes[i], &b.nodes[*j]);
                let label_changed = na.label != nb.label;
                let config_changed = na.spec != nb.spec;
                if label_changed || config_changed {
                    report.changed_nodes.push(NodeChange {
                        before: na.id.clone(),
                        after: nb.id.clone(),
                        kind: na.kind().as_str().to_string(),
                        label_changed,
                        config_changed,
                    });
                }
            }
            None => report.removed_nodes.push(node_ref(a, i)),
        }
    }
    for (j, matched) in b_matched.iter().enumerate() {
        if !matched {
            report.added_nodes.push(node_ref(b, j));
        }
    }

    // Translate a's node ids into b's index space; unmatched nodes get no image.
    let a_index: HashMap<&str, usize> = a.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let b_index: HashMap<&str, usize> = b.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i)).collect();
    let image = |id: &str| a_index.get(id).and_then(|&i| mapping[i]);

    let mut a_left: Vec<usize> = Vec::new();
    let mut b_used = vec![false; b.edges.len()];
    for (ai, ea) in a.edges.iter().enumerate() {
        let (from, to) = (image(&ea.from), image(&ea.to));
        let exact = b.edges.iter().enumerate().position(|(bj, eb)| {
            !b_used[bj]
                && from.is_some()
                && to.is_some()
                && b_index.get(eb.from.as_str()).copied() == from
                && b_index.get(eb.to.as_str()).copied() == to
                && eb.condition == ea.condition
        });
        match exact {
            Some(bj) => b_used[bj] = true,
            None => a_left.push(ai),
        }
    }
    // Remaining edges between the same (matched) endpoints differ only in condition.
    for ai in a_left {
        let ea = &a.edges[ai];
        let (from, to) = (image(&ea.from), image(&ea.to));
        let partner = from.zip(to).and_then(|(f, t)| {
            b.edges.iter().enumerate().position(|(bj, eb)| {
                !b_used[bj]
                    && b_index.get(eb.from.as_str()).copied() == Some(f)
                    && b_index.get(eb.to.as_str()).copied() == Some(t)
            })
        });
        match partner {
            Some(bj) => {
                b_used[bj] = true;
                report.changed_edges.push(EdgeChange {
                    before: edge_ref(ea),
                    after: edge_ref(&b.edges[bj]),
                });
            }
            None => report.removed_edges.push(edge_ref(ea)),
        }
    }
    for (bj, used) in b_used.iter().enumerate() {
        if !used {
            report.added_edges.push(edge_ref(&b.edges[bj]));
        }
    }
    report
}

fn initial_mapping(a: &WorkflowGraph, b: &WorkflowGraph) -> Vec<Option<usize>> {
    let rounds = a.nodes.len().max(b.nodes.len()).min(8);
    let (sa, sb) = (refined_sigs(a, rounds), refined_sigs(b, rounds));
    let base_a: Vec<u64> = a.nodes.iter().map(|n| base_sig(&n.spec, &n.label)).collect();
    let base_b: Vec<u64> = b.nodes.iter().map(|n| base_sig(&n.spec, &n.label)).collect();
    let kind_a: Vec<NodeKind> = a.nodes.iter().map(|n| n.kind()).collect();
    let kind_b: Vec<NodeKind> = b.nodes.iter().map(|n| n.kind()).collect();

    let mut mapping = vec![None; a.nodes.len()];
    let mut taken = vec![false; b.nodes.len()];
    let phases: [&dyn Fn(usize, usize) -> bool; 4] = [
        &|i, j| sa[i] == sb[j] && a.nodes[i].id == b.nodes[j].id,
        &|i, j| sa[i] == sb[j],
        &|i, j| base_a[i] == base_b[j],
        &|i, j| kind_a[i] == kind_b[j],
    ];
    for accept in phases {
        for i in 0..a.nodes.len() {
            if mapping[i].is_some() {
                continue;
            }
            if let Some(j) = (0..b.nodes.len()).find(|&j| !taken[j] && accept(i, j)) {
                mapping[i] = Some(j);
                taken[j] = true;
            }
        }
    }
    mapping
}

/// Pairwise improvement: try swapping the images of two same-kind nodes, or
/// moving a node onto an unmatched same-kind node, while the diff shrinks.
fn improve(a: &WorkflowGraph, b: &WorkflowGraph, mapping: &mut [Option<usize>]) {
    let mut best = report_for(a, b, mapping).len();
    for _ in 0..16 {
        let mut improved = false;
        for i in 0..a.nodes.len() {
            for k in (i + 1)..a.nodes.len() {
                if a.nodes[i].kind() != a.nodes[k].kind() || mapping[i] == mapping[k] {
                    continue;
                }
                mapping.swap(i, k);
                let cost = report_for(a, b, mapping).len();
                if cost < best {
                    best = cost;
                    improved = true;
                } else {
                    mapping.swap(i, k);
                }
            }
            for j in 0..b.nodes.len() {
                if a.nodes[i].kind() != b.nodes[j].kind() || mapping.contains(&Some(j)) {
                    continue;
                }
                let old = mapping[i];
                mapping[i] = Some(j);
                let cost = report_for(a, b, mapping).len();
                if cost < best {
                    best = cost;
                    improved = true;
                } else {
                    mapping[i] = old;
                }
            }
        }
        if !improved || best == 0 {
            break;
        }
    }
}

/// Structural differences between `a` and `b` (what changed going from `a`
/// to `b`). Empty exactly when the graphs are equal up to id renaming.
pub fn structural_diff(a: &WorkflowGraph, b: &WorkflowGraph) -> DiffReport {
    let mut mapping = initial_mapping(a, b);
    improve(a, b, &mut mapping);
    report_for(a, b, &mapping)
}
