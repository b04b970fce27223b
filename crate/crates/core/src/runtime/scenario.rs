//! Headless scenario runs.
//!
//! ```json
//! {
//!   "workflow": "../workflows/prototype_1.json",
//!   "fixture": "../sites/coffee_shop.json",
//!   "gateway": "../scripts/mei_run2.json",
//!   "bundle": "../bundles/scroll_hint.json",
//!   "user_query": "Order me a coffee please!",
//!   "scripted_user_responses": [{"type": "option", "value": "Cappuccino"}],
//!   "control_commands": [{"after_step": 6, "command": "pause"}]
//! }
//! ```
//!
//! Paths are relative to the scenario file. A command runs once the session
//! has taken at least `after_step` steps, in list order.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{RuntimeError, Session, SessionConfig, SessionInit, SessionState, UserResponse};
use crate::compiler::PromptBundle;
use crate::events::{Channel, ChatEvent, LogicalClock};
use crate::gateway::{GatewayError, ScriptedBackend};
use crate::sim::{load_fixture, EnvAction, FixtureError};
use crate::trace::Trace;
use crate::workflow::{self, DocError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Pause,
    Resume,
    Cancel,
    UserAction(EnvAction),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlCommand {
    pub after_step: usize,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub workflow: PathBuf,
    pub fixture: PathBuf,
    /// Script file for the scripted gateway.
    pub gateway: PathBuf,
    #[serde(default)]
    pub bundle: Option<PathBuf>,
    #[serde(default)]
    pub user_query: String,
    #[serde(default)]
    pub scripted_user_responses: Vec<UserResponse>,
    #[serde(default)]
    pub control_commands: Vec<ControlCommand>,
    #[serde(default)]
    pub config: SessionConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario {path}: {message}")]
    InvalidScenario { path: PathBuf, message: String },
    #[error("workflow {path}: {source}")]
    Workflow {
        path: PathBuf,
        #[source]
        source: DocError,
    },
    #[error("fixture {path}: {source}")]
    Fixture {
        path: PathBuf,
        #[source]
        source: FixtureError,
    },
    #[error("gateway: {0}")]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("RESPONSES_EXHAUSTED: agent asked for user response #{0} but the scenario scripts fewer")]
    ResponsesExhausted(usize),
    #[error("STALLED: session is paused and no control command remains")]
    Stalled,
}

impl ScenarioError {
    /// Errors in the inputs themselves, as opposed to the run.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            ScenarioError::Io { .. }
                | ScenarioError::InvalidScenario { .. }
                | ScenarioError::Workflow { .. }
                | ScenarioError::Fixture { .. }
        )
    }

    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::Io { .. } => "IO_ERROR",
            ScenarioError::InvalidScenario { .. } => "INVALID_SCENARIO",
            ScenarioError::Workflow { source, .. } => source.code.as_str(),
            ScenarioError::Fixture { source, .. } => source.code.as_str(),
            ScenarioError::Gateway(e) => e.code.as_str(),
            ScenarioError::Runtime(e) => e.code(),
            ScenarioError::ResponsesExhausted(_) => "RESPONSES_EXHAUSTED",
            ScenarioError::Stalled => "STALLED",
        }
    }
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a scenario and makes its paths absolute.
pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = read(path)?;
    let mut s: Scenario = serde_json::from_str(&text).map_err(|e| ScenarioError::InvalidScenario {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    for p in [&mut s.workflow, &mut s.fixture, &mut s.gateway] {
        *p = base.join(&*p);
    }
    if let Some(b) = &mut s.bundle {
        *b = base.join(&*b);
    }
    Ok(s)
}

/// Outcome of a scenario run. `error` is set when the run stopped early.
#[derive(Debug)]
pub struct ScenarioRun {
    pub session: Session,
    pub gateway_calls: usize,
    pub error: Option<ScenarioError>,
}

impl ScenarioRun {
    pub fn state(&self) -> &SessionState {
        self.session.state()
    }

    pub fn trace(&self) -> Trace {
        self.session.trace().snapshot()
    }

    pub fn events(&self) -> Vec<ChatEvent> {
        self.session.events().since(0, &[Channel::UserVisible, Channel::Debug])
    }
}

/// Counts completions served by the wrapped backend.
struct Counting {
    inner: ScriptedBackend,
    calls: Arc<std::sync::atomic::AtomicUsize>,
}

impl crate::gateway::ModelBackend for Counting {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn complete(
        &mut self,
        request: &crate::gateway::CompletionRequest<'_>,
    ) -> Result<crate::gateway::ModelOutput, GatewayError> {
        self.calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        self.inner.complete(request)
    }
}

/// Runs a scenario whose paths are already resolved.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    let workflow_text = read(&scenario.workflow)?;
    let graph = workflow::deserialize(&workflow_text).map_err(|source| ScenarioError::Workflow {
        path: scenario.workflow.clone(),
        source,
    })?;
    let site = load_fixture(&read(&scenario.fixture)?).map_err(|source| ScenarioError::Fixture {
        path: scenario.fixture.clone(),
        source,
    })?;
    let bundle = match &scenario.bundle {
        Some(p) => serde_json::from_str::<PromptBundle>(&read(p)?).map_err(|e| ScenarioError::InvalidScenario {
            path: p.clone(),
            message: e.to_string(),
        })?,
        None => PromptBundle::default(),
    };
    let script = ScriptedBackend::load(&scenario.gateway)?;
    let calls = Arc::new(std::sync::atomic::AtomicUsize::new(0));
    let backend = Counting {
        inner: script,
        calls: calls.clone(),
    };
    let mut init = SessionInit::new(graph, site, Box::new(backend), &scenario.user_query);
    init.bundle = bundle;
    init.config = scenario.config;
    init.clock = Arc::new(LogicalClock::default());
    init.id = scenario
        .workflow
        .file_stem()
        .map(|s| format!("run-{}", s.to_string_lossy()))
        .unwrap_or_else(|| "run".into());
    let mut session = Session::start(init)?;

    let error = drive(&mut session, scenario).err();
    Ok(ScenarioRun {
        session,
        gateway_calls: calls.load(std::sync::atomic::Ordering::SeqCst),
        error,
    })
}

fn drive(session: &mut Session, scenario: &Scenario) -> Result<(), ScenarioError> {
    let mut commands = scenario.control_commands.iter().peekable();
    let mut responses = scenario.scripted_user_responses.iter();
    let mut asked = 0;
    loop {
        while let Some(c) = commands.next_if(|c| session.step_count() >= c.after_step) {
            session.apply_command(&c.command)?;
        }
        match session.state().clone() {
            SessionState::Running => {
                session.step()?;
            }
            SessionState::AwaitingUser(_) => {
                asked += 1;
                let r = responses.next().ok_or(ScenarioError::ResponsesExhausted(asked))?;
                session.submit_user_response(r.clone())?;
            }
            SessionState::Paused => {
                if commands.peek().is_none() {
                    return Err(ScenarioError::Stalled);
                }
                // Commands wait on step counts, which cannot advance while paused.
                let next = commands.peek().expect("checked").after_step;
                if next > session.step_count() {
                    return Err(ScenarioError::Stalled);
                }
            }
            SessionState::Idle => unreachable!("started sessions are never idle"),
            _ => return Ok(()),
        }
    }
}

impl Session {
    /// Applies one control command immediately.
    pub fn apply_command(&mut self, command: &Command) -> Result<(), RuntimeError> {
        match command {
            Command::Pause => self.pause().map(|_| ()),
            Command::Resume => self.resume().map(|_| ()),
            Command::Cancel => self.cancel().map(|_| ()),
            Command::UserAction(a) => self.record_user_env_action(a).map(|_| ()),
        }
    }
}

/// Loads and runs the scenario at `path`.
pub fn run_scenario_file(path: &Path) -> Result<ScenarioRun, ScenarioError> {
    run_scenario(&load_scenario(path)?)
}
