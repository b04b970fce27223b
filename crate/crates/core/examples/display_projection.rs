//! Show how the UI-actions display toggles change what the chat sees for
//! the same step.
//!
//! ```text
//! cargo run -p flowbench --example display_projection
//! ```

use std::path::Path;

use flowbench::events::Channel;
use flowbench::runtime::{project_visible, run_scenario_file};
use flowbench::trace::debug_projection;
use flowbench::workflow::UiActionsDisplay;

fn main() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios/mei_run2.json");
    let run = run_scenario_file(&path).expect("bundled scenario runs");
    let trace = run.trace();
    let record = trace
        .records
        .iter()
        .find(|r| r.env_result.is_some())
        .expect("at least one UI action");

    for config in UiActionsDisplay::all_combinations() {
        let events = project_visible(record, &config);
        let kinds: Vec<String> = events
            .iter()
            .filter(|e| e.channel == Channel::UserVisible)
            .map(|e| e.payload.to_string())
            .collect();
        println!(
            "name={:<5} desc={:<5} reasoning={:<5} preview={:<5}\n    {}",
            config.show_action_name,
            config.show_description,
            config.show_reasoning,
            config.page_preview,
            if kinds.is_empty() { "(nothing)".to_string() } else { kinds.join("\n    ") }
        );
    }
    println!("debug channel:");
    for e in debug_projection(record) {
        println!("  {}", e.payload);
    }
}
