//! Enumerate the Start-to-End paths of every bundled workflow.
//!
//! ```text
//! cargo run -p flowbench --example paths
//! ```

use flowbench::compiler::{enumerate_paths, render_workflow_text};
use flowbench::fixtures;

fn main() {
    for graph in fixtures::golden_workflows() {
        let paths = enumerate_paths(&graph).expect("golden graphs are valid");
        println!("== {} ({} paths, truncated: {})", graph.id, paths.len(), paths.truncated);
        for p in &paths.paths {
            println!("   {}", p.nodes.join(" -> "));
        }
        println!("{}", render_workflow_text(&paths, &graph));
    }
}
