//! Replay both recorded coffee-ordering runs from their scenario files and
//! show where the agent could not see its target.
//!
//! ```text
//! cargo run -p flowbench --example mei_scenario
//! ```

use std::path::Path;

use flowbench::runtime::run_scenario_file;
use flowbench::trace::StepAction;

fn main() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios");
    for name in ["mei_run1.json", "mei_run2.json"] {
        let run = run_scenario_file(&dir.join(name)).expect("bundled scenario runs");
        println!(
            "== {name}: {} after {} steps, {} gateway calls",
            run.state().name(),
            run.session.step_count(),
            run.gateway_calls
        );
        let trace = run.trace();
        for r in &trace.records {
            let action = match &r.parsed_action {
                StepAction::Action { call, .. } => call.name().to_string(),
                other => format!("{other:?}"),
            };
            let outcome = r.env_result.as_ref().map(|res| res.feedback()).unwrap_or_default();
            println!("  step {:>2} {:<12} {}", r.step_index, action, outcome);
        }
        for i in &trace.interventions {
            println!("  user after step {}: {}", i.after_step, i.result.feedback());
        }
    }
}
