//! Export a trace, import it back, read one step and detect tampering.
//!
//! ```text
//! cargo run -p flowbench --example trace_replay
//! ```

use std::path::Path;

use flowbench::runtime::run_scenario_file;
use flowbench::trace::{export, import};

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios/p2_compliant.json");
    let run = run_scenario_file(&path).expect("bundled scenario runs");
    let text = run.session.trace().export();
    println!("{} lines, {} bytes", text.lines().count(), text.len());

    let trace = import(&text).expect("fresh export imports");
    assert_eq!(export(&trace), text);
    let step = run.session.trace().get(2).expect("step 2 exists");
    println!("step 2 context digest {}", step.context_digest);
    println!("step 2 reasoning: {}", step.parsed_action.reasoning());
    println!("step 99: {}", run.session.trace().get(99).unwrap_err());

    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut doc: serde_json::Value = serde_json::from_str(&lines[2]).unwrap();
    doc["record"]["wall_time"] = serde_json::json!(doc["record"]["wall_time"].as_u64().unwrap_or(0) + 1);
    lines[2] = doc.to_string();
    match import(&(lines.join("\n") + "\n")) {
        Ok(_) => println!("tampering went unnoticed"),
        Err(e) => println!("tampered: {e}"),
    }
}
