use std::path::PathBuf;

use flowbench::events::{Channel, EventKind};
use flowbench::runtime::{conformance_check, run_scenario_file, FindingCode, ScenarioRun, SessionState};
use flowbench::sim::{EnvErrorCode, Effect};
use flowbench::trace::{import, StepAction};
use flowbench::fixtures;
use flowbench::gateway::ToolCall;
use flowbench::workflow::NodeKind;

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/scenarios").join(name)
}

fn run(name: &str) -> ScenarioRun {
    let run = run_scenario_file(&scenario(name)).unwrap();
    assert!(run.error.is_none(), "{name}: {:?}", run.error);
    run
}

fn calls(run: &ScenarioRun) -> Vec<String> {
    run.trace()
        .records
        .iter()
        .map(|r| r.parsed_action.call().map_or("<failure>".into(), |c| c.name().to_string()))
        .collect()
}

fn not_visible_failures(run: &ScenarioRun) -> usize {
    run.trace()
        .records
        .iter()
        .filter_map(|r| r.env_result.as_ref())
        .filter(|r| r.error.as_ref().is_some_and(|e| e.code == EnvErrorCode::ElementNotVisible))
        .count()
}

#[test]
fn mei_first_run_needs_a_manual_fix() {
    let run = run("mei_run1.json");
    assert_eq!(run.state(), &SessionState::Completed);
    assert_eq!(not_visible_failures(&run), 3);
    let trace = run.trace();
    assert_eq!(trace.interventions.len(), 2);
    let cart = &run.session.site().cart;
    assert_eq!(cart.len(), 1);
    assert_eq!(cart[0].item, "cappuccino");
    let ask = trace.records[0].parsed_action.call().unwrap();
    match ask {
        ToolCall::AskOptions { question, options } => {
            assert!(question.starts_with("What type of coffee"));
            assert_eq!(options.len(), 3);
        }
        other => panic!("{other:?}"),
    }
    let user_messages: Vec<_> = run
        .events()
        .into_iter()
        .filter(|e| e.kind == EventKind::UserMessage)
        .map(|e| e.payload["text"].as_str().unwrap_or_default().to_string())
        .collect();
    assert!(user_messages.iter().any(|m| m == "Cappuccino"), "{user_messages:?}");
}

#[test]
fn mei_second_run_scrolls_and_completes() {
    let run = run("mei_run2.json");
    assert_eq!(run.state(), &SessionState::Completed);
    assert!(run.session.system_prompt().text.contains("Scroll down the page if"));
    assert_eq!(
        calls(&run),
        ["ask_options", "click", "click", "confirm", "click", "scroll", "click", "finish"]
    );
    let trace = run.trace();
    let confirm_at = trace
        .records
        .iter()
        .position(|r| matches!(r.parsed_action.call(), Some(ToolCall::Confirm { .. })))
        .unwrap();
    let add_at = trace
        .records
        .iter()
        .position(|r| {
            r.env_result
                .as_ref()
                .is_some_and(|e| e.effects.iter().any(|f| matches!(f, Effect::AddToCart { .. })))
        })
        .unwrap();
    assert!(confirm_at < add_at);
    assert_eq!(run.session.site().cart[0].item, "cappuccino");
}

#[test]
fn traces_match_gateway_calls_and_round_trip() {
    for name in ["mei_run1.json", "mei_run2.json", "p2_compliant.json", "p2_no_plan.json"] {
        let run = run(name);
        let trace = run.trace();
        assert_eq!(trace.records.len(), run.gateway_calls, "{name}");
        assert_eq!(trace.records.len(), run.session.step_count(), "{name}");
        let text = run.session.trace().export();
        assert_eq!(import(&text).unwrap(), trace, "{name}");
        let versions: Vec<u64> = (0..trace.records.len())
            .map(|k| run.session.trace().get(k).unwrap().observation.version)
            .collect();
        assert!(versions.windows(2).all(|w| w[0] <= w[1]), "{name}: {versions:?}");
        let debug = run
            .events()
            .into_iter()
            .filter(|e| matches!(e.kind, EventKind::ToolCall | EventKind::Reasoning))
            .count();
        assert_eq!(debug, 2 * trace.records.len());
    }
}

#[test]
fn tool_calls_and_reasoning_stay_on_debug() {
    let run = run("mei_run2.json");
    for e in run.events() {
        if matches!(e.kind, EventKind::ToolCall | EventKind::Reasoning) {
            assert_eq!(e.channel, Channel::Debug);
        }
    }
}

#[test]
fn plan_omission_is_found() {
    let graph = fixtures::prototype_2();
    let bad = conformance_check(&run("p2_no_plan.json").trace(), &graph);
    assert_eq!(bad.findings.len(), 1, "{}", bad.render());
    assert_eq!(bad.findings[0].code, FindingCode::MissingNode);
    assert_eq!(bad.findings[0].kind, Some(NodeKind::Plan));
    let good = conformance_check(&run("p2_compliant.json").trace(), &graph);
    assert!(good.is_clean(), "{}", good.render());
}

#[test]
fn failed_actions_leave_version_alone() {
    for name in ["mei_run1.json", "mei_run2.json"] {
        for r in run(name).trace().records {
            if let Some(res) = &r.env_result {
                if !res.is_ok() {
                    assert_eq!(res.version_before, res.version_after);
                }
            }
            if let StepAction::ParseFailure { .. } = r.parsed_action {
                panic!("{name}: unexpected parse failure");
            }
        }
    }
}
