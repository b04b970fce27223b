//! Check recorded runs against the workflow they ran under.
//!
//! ```text
//! cargo run -p flowbench --example conformance
//! ```

use std::path::Path;

use flowbench::fixtures;
use flowbench::runtime::{conformance_check, run_scenario_file};

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios");
    let graph = fixtures::prototype_2();
    for name in ["p2_compliant.json", "p2_no_plan.json"] {
        let run = run_scenario_file(&dir.join(name)).expect("bundled scenario runs");
        let report = conformance_check(&run.trace(), &graph);
        println!("== {name}: observed {:?}", report.observed);
        if report.is_clean() {
            println!("   clean");
        } else {
            print!("{}", report.render());
        }
    }
}
