//! Scripted exploration of the session state machine.
//!
//! Every reachable configuration (script variant, command prefix) is
//! rebuilt by replay, then every command is tried against it. A command must
//! be accepted exactly when the state allows it; accepted commands may only
//! produce legal transitions and rejected ones must leave no trace.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use flowbench::events::{Channel, EventKind};
use flowbench::fixtures;
use flowbench::gateway::{
    CompletionRequest, GatewayError, ModelBackend, ModelOutput, ScriptEntry, ScriptedBackend, ToolCall,
};
use flowbench::runtime::{
    is_legal_transition, AwaitKind, Session, SessionInit, SessionState, StepOutcome, UserResponse,
};
use flowbench::sim::{EnvAction, ScrollDirection};
use flowbench::workflow::{
    EdgeCondition, InteractConfig, InteractMode, Node, NodeSpec, UiActionsDisplay, WorkflowGraph,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmd {
    Begin,
    Step,
    Pause,
    Resume,
    Cancel,
    Respond,
    UserAction,
    RequestPause,
    RequestCancel,
}

pub const COMMANDS: [Cmd; 9] = [
    Cmd::Begin,
    Cmd::Step,
    Cmd::Pause,
    Cmd::Resume,
    Cmd::Cancel,
    Cmd::Respond,
    Cmd::UserAction,
    Cmd::RequestPause,
    Cmd::RequestCancel,
];

/// Counts completions; shared with the test after the backend is boxed.
pub struct Counting {
    inner: ScriptedBackend,
    calls: Arc<AtomicUsize>,
}

impl ModelBackend for Counting {
    fn name(&self) -> &'static str {
        "counting"
    }

    fn complete(&mut self, request: &CompletionRequest<'_>) -> Result<ModelOutput, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

fn scroll() -> ScriptEntry {
    ScriptEntry::call(
        ToolCall::Scroll {
            direction: ScrollDirection::Down,
            amount: 1,
        },
        "",
    )
}

fn finish() -> ScriptEntry {
    ScriptEntry::call(ToolCall::Finish { summary: String::new() }, "")
}

/// First entries of each script variant; all end in a finish.
fn variant(i: usize) -> Vec<ScriptEntry> {
    let lead = match i {
        0 => ScriptEntry::call(
            ToolCall::AskOptions {
                question: "Which coffee?".into(),
                options: vec!["Latte".into(), "Cappuccino".into()],
            },
            "",
        ),
        1 => ScriptEntry::call(ToolCall::AskFreeText { question: "Anything else?".into() }, ""),
        2 => ScriptEntry::call(ToolCall::Confirm { question: "Add to cart?".into() }, ""),
        3 => finish(),
        4 => {
            return vec![ScriptEntry::text("?"), ScriptEntry::text("??"), ScriptEntry::text("???")];
        }
        _ => scroll(),
    };
    vec![lead, scroll(), finish()]
}

pub const VARIANTS: usize = 6;

/// A graph offering every tool.
pub fn exploration_graph() -> WorkflowGraph {
    WorkflowGraph::new("exploration", "Every tool")
        .with_node(Node::new("start", NodeSpec::Start))
        .with_node(Node::new("ui", NodeSpec::UiActions(UiActionsDisplay::SILENT)))
        .with_node(Node::new("plan", NodeSpec::Plan))
        .with_node(Node::new("message", NodeSpec::Message))
        .with_node(Node::new("options", NodeSpec::Interact(InteractConfig { mode: InteractMode::OptionsDropdown })))
        .with_node(Node::new("free", NodeSpec::Interact(InteractConfig { mode: InteractMode::FreeText })))
        .with_node(Node::new("confirm", NodeSpec::Confirmation))
        .with_node(Node::new("end", NodeSpec::End))
        .connect("start", "ui", EdgeCondition::Always)
        .connect("ui", "end", EdgeCondition::Always)
}

pub fn session(script: Vec<ScriptEntry>) -> (Session, Arc<AtomicUsize>) {
    let calls = Arc::new(AtomicUsize::new(0));
    let backend = Counting {
        inner: ScriptedBackend::new(script),
        calls: calls.clone(),
    };
    let s = Session::new(SessionInit::new(
        exploration_graph(),
        fixtures::coffee_shop(),
        Box::new(backend),
        "Order me a coffee please!",
    ))
    .expect("valid graph");
    (s, calls)
}

fn response_for(state: &SessionState) -> UserResponse {
    match state {
        SessionState::AwaitingUser(AwaitKind::Options) => UserResponse::Option("Latte".into()),
        SessionState::AwaitingUser(AwaitKind::FreeText) => UserResponse::FreeText("No".into()),
        SessionState::AwaitingUser(AwaitKind::Confirm) => UserResponse::Confirm(true),
        _ => UserResponse::Option("Latte".into()),
    }
}

/// Whether `cmd` must be accepted in `state`.
pub fn allowed(state: &SessionState, cmd: Cmd) -> bool {
    use SessionState::*;
    match cmd {
        Cmd::Begin => *state == Idle,
        Cmd::Step => *state == Running,
        Cmd::Pause | Cmd::RequestPause => matches!(state, Running | AwaitingUser(_)),
        Cmd::Resume | Cmd::UserAction => *state == Paused,
        Cmd::Cancel | Cmd::RequestCancel => !state.is_terminal(),
        Cmd::Respond => matches!(state, AwaitingUser(_)),
    }
}

/// Applies `cmd`; `Ok` when accepted. Requests are followed by a control
/// poll, as the executor does between steps.
pub fn apply(s: &mut Session, cmd: Cmd) -> Result<(), String> {
    let r = match cmd {
        Cmd::Begin => s.begin().map(|_| ()),
        Cmd::Step => s.step().map(|_| ()),
        Cmd::Pause => s.pause().map(|_| ()),
        Cmd::Resume => s.resume().map(|_| ()),
        Cmd::Cancel => s.cancel().map(|_| ()),
        Cmd::Respond => {
            let r = response_for(s.state());
            s.submit_user_response(r).map(|_| ())
        }
        Cmd::UserAction => s
            .record_user_env_action(&EnvAction::Scroll {
                direction: ScrollDirection::Down,
                amount: 1,
            })
            .map(|_| ()),
        Cmd::RequestPause => s.control().request_pause().map(|_| {
            s.poll_controls();
        }),
        Cmd::RequestCancel => s.control().request_cancel().map(|_| {
            s.poll_controls();
        }),
    };
    r.map_err(|e| e.code().to_string())
}

pub fn label(state: &SessionState) -> String {
    match state {
        SessionState::AwaitingUser(k) => format!("awaiting_user({})", serde_json::to_value(k).unwrap().as_str().unwrap()),
        other => other.name().to_string(),
    }
}

/// Every legal transition, by label.
pub fn legal_transitions() -> BTreeSet<(String, String)> {
    let states = [
        SessionState::Idle,
        SessionState::Running,
        SessionState::AwaitingUser(AwaitKind::Options),
        SessionState::AwaitingUser(AwaitKind::FreeText),
        SessionState::AwaitingUser(AwaitKind::Confirm),
        SessionState::Paused,
        SessionState::Completed,
        SessionState::Cancelled,
        SessionState::Failed("MALFORMED_OUTPUT".into()),
    ];
    let mut out = BTreeSet::new();
    for a in &states {
        for b in &states {
            if is_legal_transition(a, b) {
                out.insert((label(a), label(b)));
            }
        }
    }
    out
}

#[derive(Debug, Default)]
pub struct Exploration {
    pub configurations: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub observed: BTreeSet<(String, String)>,
    pub absorbing_checked: usize,
}

fn replay(v: usize, prefix: &[Cmd]) -> (Session, Arc<AtomicUsize>) {
    let (mut s, calls) = session(variant(v));
    for &c in prefix {
        apply(&mut s, c).expect("prefix was accepted before");
    }
    (s, calls)
}

/// Breadth-first exploration of all variants up to `depth` commands.
pub fn explore(depth: usize) -> Exploration {
    let mut report = Exploration::default();
    for v in 0..VARIANTS {
        let mut seen: HashSet<(String, usize, usize)> = HashSet::new();
        let mut queue: VecDeque<Vec<Cmd>> = VecDeque::from([vec![]]);
        while let Some(prefix) = queue.pop_front() {
            let (s, _) = replay(v, &prefix);
            let key = (format!("{:?}", s.state()), s.step_count(), s.site().version as usize);
            if !seen.insert(key) {
                continue;
            }
            report.configurations += 1;
            for cmd in COMMANDS {
                let (mut s, calls) = replay(v, &prefix);
                let before = s.state().clone();
                let events_before = s.events().len();
                let calls_before = calls.load(Ordering::SeqCst);
                let result = apply(&mut s, cmd);
                let expected = allowed(&before, cmd);
                assert_eq!(result.is_ok(), expected, "variant {v} {prefix:?} then {cmd:?} in {before:?}: {result:?}");
                match result {
                    Ok(()) => {
                        report.accepted += 1;
                        let status = s
                            .events()
                            .since(events_before as u64, &[Channel::UserVisible])
                            .into_iter()
                            .filter(|e| e.kind == EventKind::Status);
                        for e in status {
                            let from: SessionState = serde_json::from_value(e.payload["from"].clone()).unwrap();
                            let to: SessionState = serde_json::from_value(e.payload["to"].clone()).unwrap();
                            assert!(is_legal_transition(&from, &to), "{from:?} -> {to:?}");
                            report.observed.insert((label(&from), label(&to)));
                        }
                        assert_eq!(s.trace().len(), s.step_count());
                        assert_eq!(calls.load(Ordering::SeqCst), s.step_count());
                        if prefix.len() < depth {
                            let mut next = prefix.clone();
                            next.push(cmd);
                            queue.push_back(next);
                        }
                    }
                    Err(code) => {
                        report.rejected += 1;
                        assert!(
                            matches!(
                                code.as_str(),
                                "ILLEGAL_TRANSITION" | "NOT_RUNNING" | "NOT_PAUSED" | "NOT_AWAITING"
                            ),
                            "{code}"
                        );
                        assert_eq!(s.state(), &before);
                        assert_eq!(s.events().len(), events_before);
                        assert_eq!(calls.load(Ordering::SeqCst), calls_before);
                    }
                }
                if before.is_terminal() {
                    assert_eq!(s.state(), &before);
                    report.absorbing_checked += 1;
                }
            }
        }
    }
    report
}

/// Runs a 6-step script with control commands interleaved at step indices
/// 0..=5 and checks that a cancel is honored before any further gateway
/// call. Returns the number of interleavings checked.
pub fn cancel_interleavings() -> usize {
    let controls = [Cmd::Pause, Cmd::Resume, Cmd::RequestPause, Cmd::UserAction];
    let mut checked = 0;
    for cancel_at in 0..=5usize {
        for cancel_cmd in [Cmd::Cancel, Cmd::RequestCancel] {
            for other in controls {
                for other_at in 0..=5usize {
                    let script = (0..8).map(|_| scroll()).collect();
                    let (mut s, calls) = session(script);
                    s.begin().unwrap();
                    let mut cancelled_after = None;
                    for index in 0..=6usize {
                        if index == other_at {
                            let _ = apply(&mut s, other);
                        }
                        if index == cancel_at {
                            if cancel_cmd == Cmd::Cancel {
                                s.cancel().unwrap();
                            } else {
                                s.control().request_cancel().unwrap();
                            }
                            cancelled_after = Some(calls.load(Ordering::SeqCst));
                        }
                        if s.state() == &SessionState::Paused {
                            s.resume().unwrap();
                        }
                        if s.state().is_terminal() {
                            break;
                        }
                        match s.step().unwrap() {
                            StepOutcome::Halted(SessionState::Cancelled) => break,
                            StepOutcome::Halted(_) => {}
                            StepOutcome::Stepped(_) => {}
                        }
                    }
                    let at = cancelled_after.expect("cancel issued");
                    assert_eq!(s.state(), &SessionState::Cancelled, "cancel {cancel_cmd:?}@{cancel_at}, {other:?}@{other_at}");
                    assert_eq!(calls.load(Ordering::SeqCst), at, "gateway called after cancel");
                    assert_eq!(s.trace().len(), at);
                    assert!(s.trace().is_sealed());
                    checked += 1;
                }
            }
        }
    }
    checked
}
