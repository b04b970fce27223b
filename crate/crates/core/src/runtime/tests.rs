use super::*;
use crate::fixtures;
use crate::gateway::{ScriptEntry, ScriptedBackend};

fn ask() -> ToolCall {
    ToolCall::AskOptions {
        question: "What type of coffee would you like?".into(),
        options: vec!["Latte".into(), "Cappuccino".into(), "Mocha".into()],
    }
}

fn click(id: &str) -> ToolCall {
    ToolCall::Click { element: id.into() }
}

fn session(graph: WorkflowGraph, script: Vec<ScriptEntry>) -> Session {
    start_session(
        graph,
        PromptBundle::default(),
        fixtures::coffee_shop(),
        Box::new(ScriptedBackend::new(script)),
        "Order me a coffee please!",
    )
    .unwrap()
}

#[test]
fn starts_running_with_query() {
    let s = session(fixtures::prototype_1(), vec![]);
    assert_eq!(s.state(), &SessionState::Running);
    assert_eq!(s.step_count(), 0);
    assert_eq!(s.history()[0].content, "Order me a coffee please!");
    let status: Vec<_> = s
        .events()
        .since(0, &[Channel::UserVisible])
        .into_iter()
        .filter(|e| e.kind == EventKind::Status)
        .collect();
    assert_eq!(status.len(), 1);
}

#[test]
fn invalid_graph_rejected() {
    let g = fixtures::start_end().with_node(crate::workflow::Node::new("s2", crate::workflow::NodeSpec::Start));
    let err = start_session(
        g,
        PromptBundle::default(),
        fixtures::coffee_shop(),
        Box::new(ScriptedBackend::new(vec![])),
        "",
    )
    .unwrap_err();
    assert_eq!(err.code(), "INVALID_GRAPH");
}

#[test]
fn empty_query_accepted() {
    let s = start_session(
        fixtures::start_end(),
        PromptBundle::default(),
        fixtures::coffee_shop(),
        Box::new(ScriptedBackend::new(vec![])),
        "",
    )
    .unwrap();
    assert_eq!(s.state(), &SessionState::Running);
}

#[test]
fn ask_options_awaits_user() {
    let mut s = session(fixtures::prototype_1(), vec![ScriptEntry::call(ask(), "")]);
    let rec = s.step().unwrap();
    assert_eq!(s.state(), &SessionState::AwaitingUser(AwaitKind::Options));
    let rec = rec.record().unwrap();
    assert!(rec
        .events_emitted
        .iter()
        .any(|e| e.channel == Channel::UserVisible && e.kind == EventKind::Ask));
}

#[test]
fn out_of_view_click_keeps_running() {
    let mut s = session(
        fixtures::prototype_1(),
        vec![
            ScriptEntry::call(ToolCall::Navigate { url: "/product/cappuccino".into() }, ""),
            ScriptEntry::call(click("add-to-cart"), ""),
        ],
    );
    s.step().unwrap();
    let out = s.step().unwrap();
    let r = out.record().unwrap().env_result.as_ref().unwrap();
    assert_eq!(r.error.as_ref().unwrap().code, crate::sim::EnvErrorCode::ElementNotVisible);
    assert_eq!(s.state(), &SessionState::Running);
    assert!(s.history().last().unwrap().content.contains("ELEMENT_NOT_VISIBLE"));
}

#[test]
fn finish_completes_and_is_absorbing() {
    let mut s = session(
        fixtures::start_end(),
        vec![ScriptEntry::call(ToolCall::Finish { summary: "done".into() }, "")],
    );
    s.step().unwrap();
    assert_eq!(s.state(), &SessionState::Completed);
    assert_eq!(s.step().unwrap_err().code(), "NOT_RUNNING");
    assert!(s.trace().is_sealed());
    assert_eq!(s.cancel().unwrap_err().code(), "ILLEGAL_TRANSITION");
}

#[test]
fn cancel_from_paused_then_resume_illegal() {
    let mut s = session(fixtures::prototype_1(), vec![]);
    s.pause().unwrap();
    s.cancel().unwrap();
    assert_eq!(s.resume().unwrap_err().code(), "ILLEGAL_TRANSITION");
}

#[test]
fn user_action_while_paused_updates_cart() {
    let mut s = session(
        fixtures::prototype_1(),
        vec![
            ScriptEntry::call(ToolCall::Navigate { url: "/product/latte".into() }, ""),
            ScriptEntry::call(ToolCall::Finish { summary: String::new() }, ""),
        ],
    );
    s.step().unwrap();
    assert_eq!(
        s.record_user_env_action(&EnvAction::Click { element: "add-to-cart".into() }).unwrap_err().code(),
        "NOT_PAUSED"
    );
    s.pause().unwrap();
    s.record_user_env_action(&EnvAction::Click { element: "add-to-cart".into() }).unwrap();
    assert_eq!(s.site().cart.len(), 1);
    assert_eq!(
        s.record_user_env_action(&EnvAction::Click { element: "nope".into() }).unwrap_err().code(),
        "ELEMENT_NOT_FOUND"
    );
    assert_eq!(s.state(), &SessionState::Paused);
    s.resume().unwrap();
    let out = s.step().unwrap();
    let rec = out.record().unwrap();
    assert_eq!(rec.observation.version, s.site().version);
    assert!(rec.input_context.iter().any(|m| m.tag == Some(MessageTag::UserAction)));
    assert_eq!(s.trace().snapshot().interventions.len(), 1);
}

#[test]
fn responses_by_kind() {
    let mut s = session(fixtures::prototype_1(), vec![ScriptEntry::call(ask(), "")]);
    assert_eq!(
        s.submit_user_response(UserResponse::Option("x".into())).unwrap_err().code(),
        "NOT_AWAITING"
    );
    s.step().unwrap();
    assert_eq!(
        s.submit_user_response(UserResponse::Confirm(true)).unwrap_err().code(),
        "RESPONSE_KIND_MISMATCH"
    );
    s.submit_user_response(UserResponse::Option("Cappuccino".into())).unwrap();
    assert_eq!(s.state(), &SessionState::Running);
    assert!(s.history().last().unwrap().flags.is_empty());
}

#[test]
fn off_menu_answer_flagged() {
    let mut s = session(fixtures::prototype_1(), vec![ScriptEntry::call(ask(), "")]);
    s.step().unwrap();
    s.submit_user_response(UserResponse::FreeText("Flat white".into())).unwrap();
    assert_eq!(s.history().last().unwrap().flags, ["OFF_MENU"]);
}

#[test]
fn rejection_reaches_the_model() {
    let confirm = ToolCall::Confirm {
        question: "Would you like me to perform a search?".into(),
    };
    let mut s = session(
        fixtures::prototype_4(),
        vec![
            ScriptEntry::call(confirm, ""),
            ScriptEntry::call(ToolCall::Finish { summary: String::new() }, "").when("reject"),
        ],
    );
    s.step().unwrap();
    s.submit_user_response(UserResponse::Confirm(false)).unwrap();
    let out = s.step().unwrap();
    assert!(out.record().unwrap().input_context.iter().any(|m| m.content.contains("reject")));
}

#[test]
fn malformed_output_fails_after_budget() {
    let mut s = session(
        fixtures::start_end(),
        vec![ScriptEntry::text("hm"), ScriptEntry::text("{\"tool\":\"fly\"}"), ScriptEntry::text("no")],
    );
    s.run_until_blocked().unwrap();
    assert_eq!(s.state(), &SessionState::Failed("MALFORMED_OUTPUT".into()));
    assert_eq!(s.step_count(), 3);
    assert_eq!(s.trace().len(), 3);
}

#[test]
fn parse_failure_then_recovery() {
    let mut s = session(
        fixtures::start_end(),
        vec![
            ScriptEntry::text("hm"),
            ScriptEntry::call(ToolCall::Finish { summary: String::new() }, "").when("could not be used"),
        ],
    );
    s.run_until_blocked().unwrap();
    assert_eq!(s.state(), &SessionState::Completed);
    assert_eq!(s.trace().len(), 2);
}

#[test]
fn script_exhausted_fails() {
    let mut s = session(fixtures::start_end(), vec![]);
    s.step().unwrap();
    assert_eq!(s.state(), &SessionState::Failed("SCRIPT_EXHAUSTED".into()));
    assert_eq!(s.trace().len(), 1);
}

#[test]
fn step_cap() {
    let script = (0..5)
        .map(|_| ScriptEntry::call(ToolCall::Scroll { direction: ScrollDirection::Down, amount: 1 }, ""))
        .collect();
    let mut init = SessionInit::new(
        fixtures::start_end(),
        fixtures::coffee_shop(),
        Box::new(ScriptedBackend::new(script)),
        "",
    );
    init.config.step_cap = 3;
    let mut s = Session::start(init).unwrap();
    s.run_until_blocked().unwrap();
    assert_eq!(s.state(), &SessionState::Failed("STEP_LIMIT".into()));
    assert_eq!(s.step_count(), 3);
}

#[test]
fn cancel_flag_stops_before_next_call() {
    let script = (0..5)
        .map(|_| ScriptEntry::call(ToolCall::Scroll { direction: ScrollDirection::Down, amount: 1 }, ""))
        .collect();
    let mut s = session(fixtures::start_end(), script);
    s.step().unwrap();
    s.control().request_cancel().unwrap();
    assert_eq!(s.control().request_cancel().unwrap_err().code(), "ILLEGAL_TRANSITION");
    assert!(matches!(s.step().unwrap(), StepOutcome::Halted(SessionState::Cancelled)));
    assert_eq!(s.step_count(), 1);
}

#[test]
fn pause_during_question_withdraws_it() {
    let mut s = session(
        fixtures::prototype_1(),
        vec![
            ScriptEntry::call(ask(), ""),
            ScriptEntry::call(ToolCall::Finish { summary: String::new() }, "").when("withdrawn"),
        ],
    );
    s.step().unwrap();
    s.pause().unwrap();
    assert!(s.pending_question().is_none());
    s.resume().unwrap();
    s.step().unwrap();
    assert_eq!(s.state(), &SessionState::Completed);
}

#[test]
fn status_event_per_transition() {
    let mut s = session(
        fixtures::prototype_1(),
        vec![ScriptEntry::call(ask(), ""), ScriptEntry::call(ToolCall::Finish { summary: String::new() }, "")],
    );
    s.step().unwrap();
    s.pause().unwrap();
    s.resume().unwrap();
    s.step().unwrap();
    let status: Vec<_> = s
        .events()
        .since(0, &[Channel::UserVisible])
        .into_iter()
        .filter(|e| e.kind == EventKind::Status)
        .map(|e| e.payload["to"]["state"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(status, ["running", "awaiting_user", "paused", "running", "completed"]);
}

#[test]
fn legal_transition_table() {
    use SessionState::*;
    let states = [
        Idle,
        Running,
        AwaitingUser(AwaitKind::Options),
        Paused,
        Completed,
        Cancelled,
        Failed("x".into()),
    ];
    let legal = states
        .iter()
        .flat_map(|a| states.iter().map(move |b| (a, b)))
        .filter(|(a, b)| is_legal_transition(a, b))
        .count();
    // Idle→Running, Running↔Awaiting (2), Running/Awaiting→Paused (2),
    // Paused→Running, Running→Completed/Failed (2), 4 non-terminal→Cancelled.
    assert_eq!(legal, 12);
}

#[test]
fn idle_until_begun() {
    let mut s = Session::new(SessionInit::new(
        fixtures::start_end(),
        fixtures::coffee_shop(),
        Box::new(ScriptedBackend::new(vec![])),
        "q",
    ))
    .unwrap();
    assert_eq!(s.state(), &SessionState::Idle);
    assert_eq!(s.step().unwrap_err().code(), "NOT_RUNNING");
    assert_eq!(s.pause().unwrap_err().code(), "ILLEGAL_TRANSITION");
    s.cancel().unwrap();
    assert_eq!(s.begin().unwrap_err().code(), "ILLEGAL_TRANSITION");
}
