//! Live sessions, one executor thread each.
//!
//! The executor owns its [`Session`]. Pause and cancel set flags on the
//! session's [`ControlHandle`], honored at the next step boundary, and are
//! acknowledged once the executor has polled them. Resume, answers and
//! user actions are queued to the executor and acknowledged once applied.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc, Mutex};
use std::thread;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::oneshot;

use flowbench::compiler::PromptBundle;
use flowbench::events::{EventLog, LogicalClock};
use flowbench::gateway::BackendConfig;
use flowbench::runtime::{
    ControlCommand, ControlHandle, PendingQuestion, RuntimeError, Session, SessionConfig, SessionInit, SessionState,
    UserResponse,
};
use flowbench::sim::EnvAction;
use flowbench::trace::{import, TraceHandle};

use crate::error::ApiError;
use crate::store::Store;

fn default_fixture() -> String {
    "coffee-shop".into()
}

/// Body of `POST /sessions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionRequest {
    pub workflow_id: String,
    #[serde(default = "default_fixture")]
    pub fixture_id: String,
    /// Falls back to the service default.
    #[serde(default)]
    pub gateway: Option<BackendConfig>,
    #[serde(default)]
    pub user_query: String,
    #[serde(default)]
    pub bundle: Option<PromptBundle>,
    #[serde(default)]
    pub config: Option<SessionConfig>,
    /// Applied by the executor once `after_step` steps have run, as in
    /// headless scenarios.
    #[serde(default)]
    pub control_commands: Vec<ControlCommand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub id: String,
    pub workflow_id: String,
    pub fixture_id: String,
    pub state: SessionState,
    pub step_count: usize,
    pub pending_question: Option<PendingQuestion>,
    /// False for sessions known only from a stored trace.
    pub live: bool,
}

enum Op {
    Resume,
    Respond(UserResponse),
    UserAction(EnvAction),
    Wake,
}

struct Envelope {
    op: Op,
    reply: Option<oneshot::Sender<Result<Value, ApiError>>>,
}

pub struct LiveSession {
    pub id: String,
    pub workflow_id: String,
    pub fixture_id: String,
    pub control: ControlHandle,
    pub events: EventLog,
    pub trace: TraceHandle,
    pending: Arc<Mutex<Option<PendingQuestion>>>,
    tx: Mutex<mpsc::Sender<Envelope>>,
}

impl LiveSession {
    pub fn info(&self) -> SessionInfo {
        SessionInfo {
            id: self.id.clone(),
            workflow_id: self.workflow_id.clone(),
            fixture_id: self.fixture_id.clone(),
            state: self.control.state(),
            step_count: self.trace.len(),
            pending_question: self.pending.lock().expect("pending poisoned").clone(),
            live: true,
        }
    }

    fn send(&self, op: Op) -> Option<oneshot::Receiver<Result<Value, ApiError>>> {
        let (reply, rx) = oneshot::channel();
        let env = Envelope { op, reply: Some(reply) };
        self.tx.lock().expect("sender poisoned").send(env).ok().map(|_| rx)
    }

    /// Queues `op` and waits for the executor to apply it. A finished
    /// executor answers from the final state.
    async fn call(&self, op: Op) -> Result<Value, ApiError> {
        let fallback = |op_name: &str, state: SessionState| -> ApiError {
            match op_name {
                "respond" => RuntimeError::NotAwaiting(state).into(),
                "user_action" => RuntimeError::NotPaused(state).into(),
                _ => RuntimeError::IllegalTransition {
                    from: state,
                    command: op_name.into(),
                }
                .into(),
            }
        };
        let name = match op {
            Op::Resume => "resume",
            Op::Respond(_) => "respond",
            Op::UserAction(_) => "user_action",
            Op::Wake => "wake",
        };
        match self.send(op) {
            Some(rx) => match rx.await {
                Ok(r) => r,
                Err(_) => Err(fallback(name, self.control.state())),
            },
            None => Err(fallback(name, self.control.state())),
        }
    }

    pub async fn resume(&self) -> Result<Value, ApiError> {
        self.call(Op::Resume).await
    }

    pub async fn respond(&self, response: UserResponse) -> Result<Value, ApiError> {
        self.call(Op::Respond(response)).await
    }

    pub async fn user_action(&self, action: EnvAction) -> Result<Value, ApiError> {
        self.call(Op::UserAction(action)).await
    }

    /// Requests a pause, honored at the next step boundary. Replies once
    /// the executor has seen the request.
    pub async fn pause(&self) -> Result<Value, ApiError> {
        self.control.request_pause()?;
        Ok(self.settled().await)
    }

    /// Requests cancellation, honored at the next step boundary. Replies
    /// once the executor has seen the request.
    pub async fn cancel(&self) -> Result<Value, ApiError> {
        self.control.request_cancel()?;
        Ok(self.settled().await)
    }

    async fn settled(&self) -> Value {
        match self.send(Op::Wake) {
            Some(rx) => match rx.await {
                Ok(Ok(v)) => v,
                _ => json!({ "state": self.control.state() }),
            },
            None => json!({ "state": self.control.state() }),
        }
    }
}

pub struct Sessions {
    store: Store,
    default_gateway: BackendConfig,
    live: Mutex<HashMap<String, Arc<LiveSession>>>,
    next: AtomicU64,
}

impl Sessions {
    pub fn new(store: Store, default_gateway: BackendConfig) -> Result<Sessions, ApiError> {
        let highest = store
            .list_traces()?
            .iter()
            .filter_map(|id| id.strip_prefix('s')?.parse::<u64>().ok())
            .max()
            .unwrap_or(0);
        Ok(Sessions {
            store,
            default_gateway,
            live: Mutex::new(HashMap::new()),
            next: AtomicU64::new(highest + 1),
        })
    }

    pub fn get(&self, id: &str) -> Option<Arc<LiveSession>> {
        self.live.lock().expect("sessions poisoned").get(id).cloned()
    }

    /// Live session or, failing that, the stored trace's summary.
    pub fn info(&self, id: &str) -> Result<SessionInfo, ApiError> {
        if let Some(s) = self.get(id) {
            return Ok(s.info());
        }
        let text = self.stored_trace(id)?;
        let trace = import(&text)?;
        let state = trace
            .header
            .final_state
            .clone()
            .and_then(|v| serde_json::from_value(v).ok())
            .unwrap_or(SessionState::Idle);
        Ok(SessionInfo {
            id: id.to_string(),
            workflow_id: trace.header.workflow,
            fixture_id: trace.header.fixture,
            state,
            step_count: trace.records.len(),
            pending_question: None,
            live: false,
        })
    }

    pub fn list(&self) -> Result<Vec<SessionInfo>, ApiError> {
        let mut ids: Vec<String> = self.live.lock().expect("sessions poisoned").keys().cloned().collect();
        ids.extend(self.store.list_traces()?);
        ids.sort();
        ids.dedup();
        ids.iter().map(|id| self.info(id)).collect()
    }

    pub fn stored_trace(&self, id: &str) -> Result<String, ApiError> {
        self.store
            .load_trace(id)?
            .ok_or_else(|| ApiError::new("SESSION_NOT_FOUND", format!("no session {id:?}")))
    }

    /// Exported trace of a live or stored session.
    pub fn trace_text(&self, id: &str) -> Result<String, ApiError> {
        match self.get(id) {
            Some(s) => Ok(s.trace.export()),
            None => self.stored_trace(id),
        }
    }

    pub fn create(&self, req: SessionRequest) -> Result<Arc<LiveSession>, ApiError> {
        let graph = self.store.get_workflow(&req.workflow_id)?;
        let site = self.store.get_fixture(&req.fixture_id)?;
        let gateway = req.gateway.clone().unwrap_or_else(|| self.default_gateway.clone());
        gateway.validate()?;
        let backend = gateway.build()?;
        let id = format!("s{}", self.next.fetch_add(1, Ordering::SeqCst));
        let mut init = SessionInit::new(graph, site, backend, &req.user_query);
        init.id = id.clone();
        init.bundle = req.bundle.clone().unwrap_or_default();
        init.config = req.config.unwrap_or_default();
        init.clock = Arc::new(LogicalClock::default());
        let session = Session::start(init)?;

        let (tx, rx) = mpsc::channel();
        let live = Arc::new(LiveSession {
            id: id.clone(),
            workflow_id: req.workflow_id.clone(),
            fixture_id: req.fixture_id.clone(),
            control: session.control(),
            events: session.events().clone(),
            trace: session.trace().clone(),
            pending: Arc::new(Mutex::new(None)),
            tx: Mutex::new(tx),
        });
        self.live.lock().expect("sessions poisoned").insert(id.clone(), live.clone());
        let executor = Executor {
            session,
            rx,
            commands: req.control_commands,
            next_command: 0,
            pending: live.pending.clone(),
            store: self.store.clone(),
        };
        thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || executor.run())
            .map_err(|e| ApiError::internal(e.to_string()))?;
        Ok(live)
    }
}

struct Executor {
    session: Session,
    rx: mpsc::Receiver<Envelope>,
    commands: Vec<ControlCommand>,
    next_command: usize,
    pending: Arc<Mutex<Option<PendingQuestion>>>,
    store: Store,
}

impl Executor {
    fn state_value(&self) -> Value {
        json!({ "state": self.session.state() })
    }

    fn apply(&mut self, op: Op) -> Result<Value, ApiError> {
        match op {
            Op::Resume => self.session.resume().map(|_| ())?,
            Op::Respond(r) => self.session.submit_user_response(r).map(|_| ())?,
            Op::UserAction(a) => {
                let result = self.session.record_user_env_action(&a)?;
                return Ok(json!({ "state": self.session.state(), "result": result }));
            }
            Op::Wake => {
                self.session.poll_controls();
            }
        }
        Ok(self.state_value())
    }

    fn handle(&mut self, env: Envelope) {
        let result = self.apply(env.op);
        if let Some(reply) = env.reply {
            let _ = reply.send(result);
        }
    }

    fn apply_due_commands(&mut self) {
        while let Some(c) = self.commands.get(self.next_command) {
            if self.session.step_count() < c.after_step {
                break;
            }
            if let Err(e) = self.session.apply_command(&c.command) {
                tracing::warn!(session = self.session.id(), "control command skipped: {e}");
            }
            self.next_command += 1;
        }
    }

    fn publish(&self) {
        *self.pending.lock().expect("pending poisoned") = self.session.pending_question().cloned();
    }

    fn run(mut self) {
        loop {
            while let Ok(env) = self.rx.try_recv() {
                self.handle(env);
            }
            self.apply_due_commands();
            self.session.poll_controls();
            self.publish();
            match self.session.state() {
                SessionState::Running => {
                    if let Err(e) = self.session.step() {
                        tracing::error!(session = self.session.id(), "step failed: {e}");
                        break;
                    }
                }
                s if s.is_terminal() => break,
                _ => match self.rx.recv() {
                    Ok(env) => self.handle(env),
                    Err(_) => break,
                },
            }
        }
        self.publish();
        if let Err(e) = self.store.save_trace(self.session.id(), &self.session.trace().export()) {
            tracing::error!(session = self.session.id(), "cannot persist trace: {e}");
        }
    }
}
