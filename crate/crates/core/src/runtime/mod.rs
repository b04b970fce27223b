//! The session state machine.
//!
//! A [`Session`] drives observe → complete → act. Each gateway call is one
//! step with one [`StepRecord`]. A reply that fails to parse is also a step;
//! the model gets a corrective message and `reprompt_budget` more tries before
//! the session fails with `MALFORMED_OUTPUT`.
//!
//! ```text
//! Idle -> Running <-> AwaitingUser(kind)
//! Running | AwaitingUser -> Paused -> Running
//! Running -> Completed | Failed(reason)
//! any non-terminal -> Cancelled
//! ```

mod conformance;
mod projection;
mod scenario;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::compiler::{assemble_system_prompt, compile, PromptBundle, SystemPrompt};
use crate::events::{Channel, ChatEvent, Clock, EventKind, EventLog, LogicalClock};
use crate::gateway::{
    complete, tool_schemas_for, CompletionRequest, GatewayError, InvalidGraph, Message, MessageRole, MessageTag,
    ModelBackend, Purpose, ToolCall, ToolSchema,
};
use crate::sim::{observe, ActionResult, EnvAction, EnvError, ScrollDirection, SimSite, Viewport};
use crate::trace::{context_digest, StepAction, StepRecord, TraceHandle, UserIntervention};
use crate::workflow::{UiActionsDisplay, WorkflowGraph};

pub use conformance::{call_kind, conformance_check, ConformanceReport, Finding, FindingCode};
pub use projection::project_visible;
pub use scenario::{
    load_scenario, run_scenario, run_scenario_file, ControlCommand, Scenario, ScenarioError, ScenarioRun, Command,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AwaitKind {
    Options,
    FreeText,
    Confirm,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "state", content = "detail", rename_all = "snake_case")]
pub enum SessionState {
    Idle,
    Running,
    AwaitingUser(AwaitKind),
    Paused,
    Completed,
    Cancelled,
    Failed(String),
}

impl SessionState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, SessionState::Completed | SessionState::Cancelled | SessionState::Failed(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            SessionState::Idle => "idle",
            SessionState::Running => "running",
            SessionState::AwaitingUser(_) => "awaiting_user",
            SessionState::Paused => "paused",
            SessionState::Completed => "completed",
            SessionState::Cancelled => "cancelled",
            SessionState::Failed(_) => "failed",
        }
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("state serializes")
    }
}

/// Whether `from -> to` is one of the machine's transitions.
pub fn is_legal_transition(from: &SessionState, to: &SessionState) -> bool {
    use SessionState::*;
    match (from, to) {
        (Idle, Running) => true,
        (Running, AwaitingUser(_)) | (AwaitingUser(_), Running) => true,
        (Running, Paused) | (AwaitingUser(_), Paused) | (Paused, Running) => true,
        (Running, Completed) | (Running, Failed(_)) => true,
        (f, Cancelled) => !f.is_terminal(),
        _ => false,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum UserResponse {
    Option(String),
    FreeText(String),
    Confirm(bool),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingQuestion {
    pub kind: AwaitKind,
    pub question: String,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error(transparent)]
    InvalidGraph(#[from] InvalidGraph),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error("ILLEGAL_TRANSITION: cannot {command} from {}", from.name())]
    IllegalTransition { from: SessionState, command: String },
    #[error("NOT_RUNNING: session is {}", .0.name())]
    NotRunning(SessionState),
    #[error("NOT_PAUSED: session is {}", .0.name())]
    NotPaused(SessionState),
    #[error("NOT_AWAITING: session is {}", .0.name())]
    NotAwaiting(SessionState),
    #[error("RESPONSE_KIND_MISMATCH: awaiting {expected:?}")]
    ResponseKindMismatch { expected: AwaitKind },
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl RuntimeError {
    pub fn code(&self) -> &'static str {
        match self {
            RuntimeError::InvalidGraph(_) => "INVALID_GRAPH",
            RuntimeError::Gateway(e) => e.code.as_str(),
            RuntimeError::IllegalTransition { .. } => "ILLEGAL_TRANSITION",
            RuntimeError::NotRunning(_) => "NOT_RUNNING",
            RuntimeError::NotPaused(_) => "NOT_PAUSED",
            RuntimeError::NotAwaiting(_) => "NOT_AWAITING",
            RuntimeError::ResponseKindMismatch { .. } => "RESPONSE_KIND_MISMATCH",
            RuntimeError::Env(e) => e.code.as_str(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub step_cap: usize,
    pub reprompt_budget: u32,
    pub viewport_height: u32,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            step_cap: 50,
            reprompt_budget: 2,
            viewport_height: Viewport::DEFAULT_HEIGHT,
        }
    }
}

#[derive(Debug, Default)]
struct Flags {
    pause: AtomicBool,
    cancel: AtomicBool,
}

/// Cross-thread control surface: pause/cancel requests honored at the next
/// step boundary, plus a read-only mirror of the session state.
#[derive(Debug, Clone)]
pub struct ControlHandle {
    flags: Arc<Flags>,
    state: Arc<RwLock<SessionState>>,
}

impl ControlHandle {
    fn new() -> Self {
        ControlHandle {
            flags: Arc::default(),
            state: Arc::new(RwLock::new(SessionState::Idle)),
        }
    }

    pub fn state(&self) -> SessionState {
        self.state.read().expect("state poisoned").clone()
    }

    pub fn pause_requested(&self) -> bool {
        self.flags.pause.load(Ordering::SeqCst)
    }

    pub fn cancel_requested(&self) -> bool {
        self.flags.cancel.load(Ordering::SeqCst)
    }

    /// Asks for a pause. Legal from Running or AwaitingUser.
    pub fn request_pause(&self) -> Result<(), RuntimeError> {
        let state = self.state();
        let legal = matches!(state, SessionState::Running | SessionState::AwaitingUser(_));
        if !legal || self.cancel_requested() || self.flags.pause.swap(true, Ordering::SeqCst) {
            return Err(RuntimeError::IllegalTransition {
                from: state,
                command: "pause".into(),
            });
        }
        Ok(())
    }

    /// Asks for cancellation. Legal from any non-terminal state, once.
    pub fn request_cancel(&self) -> Result<(), RuntimeError> {
        let state = self.state();
        if state.is_terminal() || self.flags.cancel.swap(true, Ordering::SeqCst) {
            return Err(RuntimeError::IllegalTransition {
                from: state,
                command: "cancel".into(),
            });
        }
        Ok(())
    }
}

/// Result of one call to [`Session::step`].
#[derive(Debug, Clone)]
pub enum StepOutcome {
    /// A gateway call was made and recorded.
    Stepped(Arc<StepRecord>),
    /// No gateway call: a control flag or the step cap ended the run first.
    Halted(SessionState),
}

impl StepOutcome {
    pub fn record(&self) -> Option<&Arc<StepRecord>> {
        match self {
            StepOutcome::Stepped(r) => Some(r),
            StepOutcome::Halted(_) => None,
        }
    }
}

/// Everything needed to start a session.
pub struct SessionInit {
    pub id: String,
    pub graph: WorkflowGraph,
    pub bundle: PromptBundle,
    pub site: SimSite,
    pub backend: Box<dyn ModelBackend>,
    pub user_query: String,
    pub config: SessionConfig,
    pub clock: Arc<dyn Clock>,
}

impl SessionInit {
    pub fn new(graph: WorkflowGraph, site: SimSite, backend: Box<dyn ModelBackend>, user_query: &str) -> Self {
        SessionInit {
            id: "session".into(),
            graph,
            bundle: PromptBundle::default(),
            site,
            backend,
            user_query: user_query.into(),
            config: SessionConfig::default(),
            clock: Arc::new(LogicalClock::default()),
        }
    }
}

pub struct Session {
    id: String,
    graph: WorkflowGraph,
    bundle: PromptBundle,
    system_prompt: SystemPrompt,
    tools: Vec<ToolSchema>,
    display: UiActionsDisplay,
    state: SessionState,
    history: Vec<Message>,
    site: SimSite,
    viewport: Viewport,
    step_count: usize,
    consecutive_failures: u32,
    pending: Option<PendingQuestion>,
    withdrawn: Option<PendingQuestion>,
    backend: Box<dyn ModelBackend>,
    config: SessionConfig,
    trace: TraceHandle,
    events: EventLog,
    control: ControlHandle,
    user_query: String,
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("state", &self.state)
            .field("step_count", &self.step_count)
            .finish_non_exhaustive()
    }
}

/// Starts a session with default settings.
pub fn start_session(
    graph: WorkflowGraph,
    bundle: PromptBundle,
    site: SimSite,
    backend: Box<dyn ModelBackend>,
    user_query: &str,
) -> Result<Session, RuntimeError> {
    let mut init = SessionInit::new(graph, site, backend, user_query);
    init.bundle = bundle;
    Session::start(init)
}

fn describe_call(call: &ToolCall, site: &SimSite) -> String {
    let label = |id: &str| {
        site.current_page()
            .element(id)
            .map(|e| e.label.clone())
            .unwrap_or_else(|| id.to_string())
    };
    match call {
        ToolCall::Click { element } => format!("Click \"{}\"", label(element)),
        ToolCall::Type { element, text } => format!("Type \"{text}\" into \"{}\"", label(element)),
        ToolCall::Scroll { direction, amount } => format!(
            "Scroll {} {amount} rows",
            if *direction == ScrollDirection::Up { "up" } else { "down" }
        ),
        ToolCall::Navigate { url } => format!("Go to {url}"),
        other => other.name().to_string(),
    }
}

impl Session {
    /// [`Session::new`] followed by [`Session::begin`].
    pub fn start(init: SessionInit) -> Result<Session, RuntimeError> {
        let mut session = Session::new(init)?;
        session.begin()?;
        Ok(session)
    }

    /// Validates the graph and assembles the system prompt. The session is
    /// left Idle.
    pub fn new(init: SessionInit) -> Result<Session, RuntimeError> {
        let tools = tool_schemas_for(&init.graph)?;
        let system_prompt = if init.bundle.workflow_prompt.is_empty() {
            compile(&init.graph, &init.bundle, None)
                .map_err(|e| match e {
                    crate::compiler::CompileError::InvalidGraph(g) => RuntimeError::InvalidGraph(g),
                    crate::compiler::CompileError::Gateway(g) => RuntimeError::Gateway(g),
                    crate::compiler::CompileError::MalformedRegeneration(_) => unreachable!("compile never regenerates"),
                })?
                .system_prompt
        } else {
            assemble_system_prompt(&init.bundle, &init.graph)
        };
        let trace = TraceHandle::new(&init.id, &init.graph.id, &init.site.id);
        let display = init.graph.ui_actions_display().unwrap_or(UiActionsDisplay {
            show_action_name: true,
            show_description: true,
            ..UiActionsDisplay::SILENT
        });
        Ok(Session {
            id: init.id,
            display,
            system_prompt,
            tools,
            state: SessionState::Idle,
            history: Vec::new(),
            site: init.site,
            viewport: Viewport::new(init.config.viewport_height),
            step_count: 0,
            consecutive_failures: 0,
            pending: None,
            withdrawn: None,
            backend: init.backend,
            config: init.config,
            trace,
            events: EventLog::new(init.clock),
            control: ControlHandle::new(),
            graph: init.graph,
            bundle: init.bundle,
            user_query: init.user_query,
        })
    }

    /// Records the user query and moves Idle → Running.
    pub fn begin(&mut self) -> Result<&SessionState, RuntimeError> {
        if self.state != SessionState::Idle {
            return Err(self.illegal("begin"));
        }
        self.history
            .push(Message::user(self.user_query.clone()).tagged(MessageTag::UserQuery));
        self.transition(SessionState::Running, None);
        self.emit(ChatEvent::draft(
            Channel::UserVisible,
            EventKind::UserMessage,
            json!({ "text": self.user_query }),
            None,
        ));
        Ok(&self.state)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn graph(&self) -> &WorkflowGraph {
        &self.graph
    }

    pub fn bundle(&self) -> &PromptBundle {
        &self.bundle
    }

    pub fn system_prompt(&self) -> &SystemPrompt {
        &self.system_prompt
    }

    pub fn tools(&self) -> &[ToolSchema] {
        &self.tools
    }

    pub fn display(&self) -> UiActionsDisplay {
        self.display
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn history(&self) -> &[Message] {
        &self.history
    }

    pub fn site(&self) -> &SimSite {
        &self.site
    }

    pub fn viewport(&self) -> Viewport {
        self.viewport
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn pending_question(&self) -> Option<&PendingQuestion> {
        self.pending.as_ref()
    }

    pub fn trace(&self) -> &TraceHandle {
        &self.trace
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn control(&self) -> ControlHandle {
        self.control.clone()
    }

    fn emit(&self, draft: ChatEvent) -> ChatEvent {
        self.events.push(draft)
    }

    /// Moves to `to`, emitting exactly one status event.
    fn transition(&mut self, to: SessionState, step: Option<usize>) -> ChatEvent {
        debug_assert!(is_legal_transition(&self.state, &to), "{:?} -> {:?}", self.state, to);
        let from = std::mem::replace(&mut self.state, to.clone());
        *self.control.state.write().expect("state poisoned") = to.clone();
        let ev = self.emit(ChatEvent::draft(
            Channel::UserVisible,
            EventKind::Status,
            json!({ "from": from.to_value(), "to": to.to_value() }),
            step,
        ));
        if to.is_terminal() {
            self.control.flags.pause.store(false, Ordering::SeqCst);
            self.control.flags.cancel.store(false, Ordering::SeqCst);
        }
        ev
    }

    fn finish_if_terminal(&self) {
        if self.state.is_terminal() {
            self.trace.seal(self.state.to_value());
            self.events.close();
        }
    }

    /// Honors pending pause/cancel requests. Returns the status events emitted.
    pub fn poll_controls(&mut self) -> Vec<ChatEvent> {
        let out = self.poll_controls_at(None);
        self.finish_if_terminal();
        out
    }

    /// Like [`Session::poll_controls`] but leaves sealing to the caller, so a
    /// step record can still be appended.

    fn poll_controls_at(&mut self, step: Option<usize>) -> Vec<ChatEvent> {
        let mut out = Vec::new();
        if self.state.is_terminal() {
            return out;
        }
        // Flags are cleared only after the mirror has moved, so a repeated
        // request is rejected rather than silently absorbed.
        if self.control.flags.cancel.load(Ordering::SeqCst) {
            self.pending = None;
            out.push(self.transition(SessionState::Cancelled, step));
            return out;
        }
        if self.control.flags.pause.load(Ordering::SeqCst) {
            if matches!(self.state, SessionState::Running | SessionState::AwaitingUser(_)) {
                self.withdrawn = self.pending.take();
                out.push(self.transition(SessionState::Paused, step));
            }
            self.control.flags.pause.store(false, Ordering::SeqCst);
        }
        out
    }

    /// Builds the model context: system prompt, history, current observation.
    pub fn context(&self) -> Vec<Message> {
        let obs = observe(&self.site, &self.viewport);
        let mut ctx = Vec::with_capacity(self.history.len() + 2);
        ctx.push(Message::system(self.system_prompt.text.clone()));
        ctx.extend(self.history.iter().cloned());
        ctx.push(Message::user(obs.to_prompt_text()).tagged(MessageTag::Observation));
        ctx
    }

    /// One observe → complete → act cycle.
    pub fn step(&mut self) -> Result<StepOutcome, RuntimeError> {
        if self.state != SessionState::Running {
            return Err(RuntimeError::NotRunning(self.state.clone()));
        }
        let index = self.step_count;
        self.poll_controls_at(Some(index));
        if self.state != SessionState::Running {
            self.finish_if_terminal();
            return Ok(StepOutcome::Halted(self.state.clone()));
        }
        if self.step_count >= self.config.step_cap {
            self.transition(SessionState::Failed("STEP_LIMIT".into()), Some(index));
            self.finish_if_terminal();
            return Ok(StepOutcome::Halted(self.state.clone()));
        }

        let observation = observe(&self.site, &self.viewport);
        let input_context = self.context();
        let digest = context_digest(&input_context);
        let result = complete(
            self.backend.as_mut(),
            &CompletionRequest {
                purpose: Purpose::Act,
                messages: &input_context,
                tools: &self.tools,
            },
        );
        self.step_count += 1;

        let mut env_result = None;
        let mut next_state = SessionState::Running;
        let (output, parsed_action) = match result {
            Err(error) => {
                next_state = SessionState::Failed(error.code.as_str().into());
                (None, StepAction::GatewayFailure { error })
            }
            Ok(output) => match output.to_reply(&self.tools) {
                Err(failure) => {
                    self.consecutive_failures += 1;
                    let raw = if output.raw.is_empty() { failure.raw.clone() } else { output.raw.clone() };
                    self.history.push(Message::new(MessageRole::Assistant, raw).tagged(MessageTag::ModelCall));
                    self.history.push(
                        Message::user(format!(
                            "Your last reply could not be used ({failure}). Reply with exactly one JSON tool call as described under Tool Usage."
                        ))
                        .tagged(MessageTag::Corrective),
                    );
                    if self.consecutive_failures > self.config.reprompt_budget {
                        next_state = SessionState::Failed("MALFORMED_OUTPUT".into());
                    }
                    (Some(output), StepAction::ParseFailure { failure })
                }
                Ok(reply) => {
                    self.consecutive_failures = 0;
                    let call = reply.call;
                    let reasoning = reply.reasoning.unwrap_or_default();
                    let description = reply.description.unwrap_or_else(|| describe_call(&call, &self.site));
                    let said = crate::canonical::to_compact(&json!({
                        "tool": call.name(),
                        "args": call.arguments(),
                        "reasoning": reasoning,
                        "description": description,
                    }));
                    self.history.push(Message::new(MessageRole::Assistant, said).tagged(MessageTag::ModelCall));
                    next_state = self.dispatch(&call, &mut env_result);
                    (
                        Some(output),
                        StepAction::Action {
                            call,
                            reasoning,
                            description,
                        },
                    )
                }
            },
        };

        let mut record = StepRecord {
            step_index: index,
            observation,
            context_digest: digest,
            input_context,
            output,
            parsed_action,
            env_result,
            events_emitted: Vec::new(),
            wall_time: self.events.clock().now_ms(),
        };
        let mut emitted: Vec<ChatEvent> = project_visible(&record, &self.display)
            .into_iter()
            .map(|e| self.emit(e))
            .collect();
        if next_state != self.state {
            emitted.push(self.transition(next_state, Some(index)));
        }
        emitted.extend(self.poll_controls_at(Some(index)));
        record.events_emitted = emitted;
        self.trace.append(record).expect("session owns trace indexing");
        self.finish_if_terminal();
        Ok(StepOutcome::Stepped(self.trace.get(index).expect("just appended")))
    }

    fn dispatch(&mut self, call: &ToolCall, env_result: &mut Option<ActionResult>) -> SessionState {
        let ask = |kind: AwaitKind, question: &str, options: &[String]| PendingQuestion {
            kind,
            question: question.to_string(),
            options: options.to_vec(),
        };
        match call {
            ToolCall::AskOptions { question, options } => {
                self.pending = Some(ask(AwaitKind::Options, question, options));
                SessionState::AwaitingUser(AwaitKind::Options)
            }
            ToolCall::AskFreeText { question } => {
                self.pending = Some(ask(AwaitKind::FreeText, question, &[]));
                SessionState::AwaitingUser(AwaitKind::FreeText)
            }
            ToolCall::Confirm { question } => {
                self.pending = Some(ask(AwaitKind::Confirm, question, &[]));
                SessionState::AwaitingUser(AwaitKind::Confirm)
            }
            ToolCall::ShowPlan { .. } | ToolCall::SendMessage { .. } => SessionState::Running,
            ToolCall::Finish { .. } => SessionState::Completed,
            env => {
                let action = env.env_action().expect("environment call");
                let result = self.site.apply(&mut self.viewport, &action);
                self.history
                    .push(Message::new(MessageRole::Tool, result.feedback()).tagged(MessageTag::ActionResult));
                *env_result = Some(result);
                SessionState::Running
            }
        }
    }

    /// Steps until the session leaves Running.
    pub fn run_until_blocked(&mut self) -> Result<&SessionState, RuntimeError> {
        while self.state == SessionState::Running {
            self.step()?;
        }
        Ok(&self.state)
    }

    fn illegal(&self, command: &str) -> RuntimeError {
        RuntimeError::IllegalTransition {
            from: self.state.clone(),
            command: command.into(),
        }
    }

    /// Running or AwaitingUser → Paused, immediately. A pending question is
    /// withdrawn.
    pub fn pause(&mut self) -> Result<&SessionState, RuntimeError> {
        if !matches!(self.state, SessionState::Running | SessionState::AwaitingUser(_)) {
            return Err(self.illegal("pause"));
        }
        self.control.flags.pause.store(false, Ordering::SeqCst);
        self.withdrawn = self.pending.take();
        self.transition(SessionState::Paused, None);
        Ok(&self.state)
    }

    /// Paused → Running. The next step observes the site as the user left it.
    pub fn resume(&mut self) -> Result<&SessionState, RuntimeError> {
        if self.state != SessionState::Paused {
            return Err(self.illegal("resume"));
        }
        if let Some(q) = self.withdrawn.take() {
            self.history.push(
                Message::user(format!(
                    "The user paused the session instead of answering \"{}\"; that question was withdrawn.",
                    q.question
                ))
                .tagged(MessageTag::Note),
            );
        }
        self.transition(SessionState::Running, None);
        Ok(&self.state)
    }

    /// Any non-terminal state → Cancelled.
    pub fn cancel(&mut self) -> Result<&SessionState, RuntimeError> {
        if self.state.is_terminal() {
            return Err(self.illegal("cancel"));
        }
        self.control.flags.cancel.store(false, Ordering::SeqCst);
        self.pending = None;
        self.transition(SessionState::Cancelled, None);
        self.finish_if_terminal();
        Ok(&self.state)
    }

    /// Applies an environment action performed by the user while paused.
    pub fn record_user_env_action(&mut self, action: &EnvAction) -> Result<ActionResult, RuntimeError> {
        if self.state != SessionState::Paused {
            return Err(RuntimeError::NotPaused(self.state.clone()));
        }
        let result = self.site.apply(&mut self.viewport, action);
        if let Some(err) = &result.error {
            return Err(RuntimeError::Env(err.clone()));
        }
        self.history.push(
            Message::user(format!("While the agent was paused, the user did: {}", result.feedback()))
                .tagged(MessageTag::UserAction),
        );
        self.emit(ChatEvent::draft(
            Channel::UserVisible,
            EventKind::ActionNotice,
            json!({ "actor": "user", "action": action.name(), "args": action, "effects": result.effects }),
            None,
        ));
        self.trace
            .record_intervention(UserIntervention {
                after_step: self.step_count,
                action: action.clone(),
                result: result.clone(),
            })
            .expect("paused session trace is open");
        Ok(result)
    }

    /// Answers the pending question.
    pub fn submit_user_response(&mut self, response: UserResponse) -> Result<&SessionState, RuntimeError> {
        let SessionState::AwaitingUser(kind) = self.state else {
            return Err(RuntimeError::NotAwaiting(self.state.clone()));
        };
        let pending = self.pending.clone().expect("awaiting state has a question");
        let (text, off_menu) = match (kind, &response) {
            (AwaitKind::Options, UserResponse::Option(s) | UserResponse::FreeText(s)) => {
                (s.clone(), !pending.options.iter().any(|o| o == s))
            }
            (AwaitKind::FreeText, UserResponse::FreeText(s)) => (s.clone(), false),
            (AwaitKind::Confirm, UserResponse::Confirm(true)) => ("Yes, I confirm. Go ahead.".to_string(), false),
            (AwaitKind::Confirm, UserResponse::Confirm(false)) => {
                ("No, I reject this. Do not do it.".to_string(), false)
            }
            _ => return Err(RuntimeError::ResponseKindMismatch { expected: kind }),
        };
        let mut msg = Message::user(text.clone()).tagged(MessageTag::UserResponse);
        if off_menu {
            msg = msg.flagged("OFF_MENU");
        }
        self.history.push(msg);
        let mut payload = json!({ "text": text, "in_reply_to": pending.question });
        if let UserResponse::Confirm(accepted) = response {
            payload["accepted"] = json!(accepted);
        }
        if off_menu {
            payload["off_menu"] = json!(true);
        }
        self.emit(ChatEvent::draft(Channel::UserVisible, EventKind::UserMessage, payload, None));
        self.pending = None;
        self.transition(SessionState::Running, None);
        Ok(&self.state)
    }
}

#[cfg(test)]
mod tests;
