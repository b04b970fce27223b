use serde::Serialize;

use crate::gateway::InvalidGraph;
use crate::workflow::WorkflowGraph;

/// Safety valve on pathological graphs; hitting it sets `truncated`.
pub const MAX_PATHS: usize = 100_000;

/// A walk from Start. `nodes.len() == edges.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Path {
    pub nodes: Vec<String>,
    pub edges: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PathSet {
    pub paths: Vec<Path>,
    /// Set when some walk stopped only because its remaining edges were
    /// already used, or when [`MAX_PATHS`] was reached.
    pub truncated: bool,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// Depth-first enumeration of edge-simple walks from Start.
///
/// Children are visited in edge declaration order. A walk ends when its last
/// node has no unused outgoing edge.
pub fn enumerate_paths(graph: &WorkflowGraph) -> Result<PathSet, InvalidGraph> {
    InvalidGraph::check(graph)?;
    let start = graph.start().expect("valid graph has a start node");
    let out: Vec<Vec<usize>> = graph
        .nodes
        .iter()
        .map(|n| {
            graph
                .edges
                .iter()
                .enumerate()
                .filter(|(_, e)| e.from == n.id)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let index = |id: &str| graph.nodes.iter().position(|n| n.id == id).expect("valid graph has no dangling edges");

    let mut walk = Walk {
        graph,
        out: &out,
        used: vec![false; graph.edges.len()],
        edge_stack: Vec::new(),
        set: PathSet {
            paths: Vec::new(),
            truncated: false,
        },
    };
    walk.visit(index(&start.id), &index);
    Ok(walk.set)
}

struct Walk<'a> {
    graph: &'a WorkflowGraph,
    out: &'a [Vec<usize>],
    used: Vec<bool>,
    edge_stack: Vec<usize>,
    set: PathSet,
}

impl Walk<'_> {
    fn visit(&mut self, node: usize, index: &dyn Fn(&str) -> usize) {
        if self.set.paths.len() >= MAX_PATHS {
            self.set.truncated = true;
            return;
        }
        let next: Vec<usize> = self.out[node].iter().copied().filter(|&e| !self.used[e]).collect();
        if next.is_empty() {
            if !self.out[node].is_empty() {
                self.set.truncated = true;
            }
            self.emit(node);
            return;
        }
        for e in next {
            self.used[e] = true;
            self.edge_stack.push(e);
            self.visit(index(&self.graph.edges[e].to), index);
            self.edge_stack.pop();
            self.used[e] = false;
        }
    }

    fn emit(&mut self, _last: usize) {
        let g = self.graph;
        let mut nodes = vec![g.start().expect("valid").id.clone()];
        let mut edges = Vec::with_capacity(self.edge_stack.len());
        for &e in &self.edge_stack {
            nodes.push(g.edges[e].to.clone());
            edges.push(g.edges[e].id.clone());
        }
        self.set.paths.push(Path { nodes, edges });
    }
}
