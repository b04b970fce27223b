//! Shared helpers for the service tests: a blocking HTTP client, an SSE
//! reader and a scenario driver that goes through the API only.

#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use flowbench::runtime::{load_scenario, Command, ControlCommand, Scenario};
use flowbench::workflow::deserialize;
use flowbench_service::{BackgroundServer, ServiceConfig};

pub fn core_fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn scenario_path(name: &str) -> PathBuf {
    core_fixtures().join("scenarios").join(name)
}

/// Scenarios run by both the headless and API suites.
pub const SCENARIOS: [&str; 4] = ["mei_run1.json", "mei_run2.json", "p2_compliant.json", "p2_no_plan.json"];

pub struct TestServer {
    pub server: BackgroundServer,
    pub http: Http,
    pub dir: tempfile::TempDir,
}

impl TestServer {
    pub fn start() -> TestServer {
        let dir = tempfile::tempdir().expect("tempdir");
        let server = start_in(dir.path());
        let http = Http::new(&server);
        TestServer { server, http, dir }
    }

    /// Stops the server and starts a new one on the same store.
    pub fn restart(self) -> TestServer {
        let TestServer { server, dir, .. } = self;
        server.stop();
        let server = start_in(dir.path());
        let http = Http::new(&server);
        TestServer { server, http, dir }
    }
}

pub fn start_in(store: &Path) -> BackgroundServer {
    let config = ServiceConfig {
        listen: "127.0.0.1:0".into(),
        store_dir: store.to_path_buf(),
        ..ServiceConfig::default()
    };
    BackgroundServer::start(config).expect("server starts")
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseEvent {
    pub id: String,
    pub event: String,
    pub data: Value,
}

pub struct Http {
    base: String,
    agent: ureq::Agent,
}

impl Http {
    pub fn new(server: &BackgroundServer) -> Http {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(20)))
            .build()
            .into();
        Http {
            base: server.url(""),
            agent,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> (u16, String) {
        let resp = resp.expect("request completes");
        let status = resp.status().as_u16();
        let text = resp.into_body().read_to_string().expect("body");
        (status, text)
    }

    fn json(text: &str) -> Value {
        if text.is_empty() {
            Value::Null
        } else {
            serde_json::from_str(text).unwrap_or_else(|e| panic!("not JSON ({e}): {text}"))
        }
    }

    pub fn get_text(&self, path: &str) -> (u16, String) {
        Self::finish(self.agent.get(self.url(path)).call())
    }

    pub fn get(&self, path: &str) -> (u16, Value) {
        let (s, t) = self.get_text(path);
        (s, Self::json(&t))
    }

    pub fn post_text(&self, path: &str, body: &str) -> (u16, Value) {
        let (s, t) = Self::finish(
            self.agent
                .post(self.url(path))
                .header("content-type", "application/json")
                .send(body),
        );
        (s, Self::json(&t))
    }

    pub fn post(&self, path: &str, body: &Value) -> (u16, Value) {
        self.post_text(path, &body.to_string())
    }

    pub fn post_empty(&self, path: &str) -> (u16, Value) {
        let (s, t) = Self::finish(self.agent.post(self.url(path)).send_empty());
        (s, Self::json(&t))
    }

    pub fn put_text(&self, path: &str, body: &str) -> (u16, Value) {
        let (s, t) = Self::finish(
            self.agent
                .put(self.url(path))
                .header("content-type", "application/json")
                .send(body),
        );
        (s, Self::json(&t))
    }

    /// Reads a server-sent event stream to its end.
    pub fn events(&self, path: &str) -> Vec<SseEvent> {
        let resp = self.agent.get(self.url(path)).call().expect("stream opens");
        assert_eq!(resp.status().as_u16(), 200, "events {path}");
        let reader = BufReader::new(resp.into_body().into_reader());
        let mut out = Vec::new();
        let (mut id, mut event, mut data) = (String::new(), String::new(), String::new());
        for line in reader.lines() {
            let line = line.expect("stream line");
            if line.is_empty() {
                if !data.is_empty() {
                    out.push(SseEvent {
                        id: std::mem::take(&mut id),
                        event: std::mem::take(&mut event),
                        data: serde_json::from_str(&data).expect("event data is JSON"),
                    });
                }
                data.clear();
                continue;
            }
            if let Some(v) = line.strip_prefix("id:") {
                id = v.trim_start().to_string();
            } else if let Some(v) = line.strip_prefix("event:") {
                event = v.trim_start().to_string();
            } else if let Some(v) = line.strip_prefix("data:") {
                data.push_str(v.strip_prefix(' ').unwrap_or(v));
            }
        }
        out
    }

    /// Polls until the session leaves `running`.
    pub fn settle(&self, id: &str) -> Value {
        let deadline = Instant::now() + Duration::from_secs(10);
        loop {
            let (status, info) = self.get(&format!("/sessions/{id}"));
            assert_eq!(status, 200, "{info}");
            if info["state"]["state"] != "running" {
                return info;
            }
            assert!(Instant::now() < deadline, "session {id} never settled");
            std::thread::sleep(Duration::from_millis(2));
        }
    }
}

pub fn state_name(info: &Value) -> &str {
    info["state"]["state"].as_str().unwrap_or("")
}

#[derive(Debug)]
pub struct ApiRun {
    pub session: String,
    pub info: Value,
    pub trace_text: String,
    pub events: Vec<SseEvent>,
}

fn is_server_side(c: &ControlCommand) -> bool {
    matches!(c.command, Command::Pause | Command::Cancel)
}

/// Uploads a scenario's workflow and fixture and runs it through the API.
///
/// Pause and cancel commands travel with the session request and fire at
/// their step boundary inside the executor. Resume and user actions are
/// posted by this client once the session is paused and the step count
/// has been reached. Scripted answers are posted whenever the session
/// awaits the user.
pub fn run_scenario_via_api(http: &Http, path: &Path) -> Result<ApiRun, String> {
    let sc: Scenario = load_scenario(path).map_err(|e| e.to_string())?;
    let workflow_text = std::fs::read_to_string(&sc.workflow).map_err(|e| e.to_string())?;
    let graph = deserialize(&workflow_text).map_err(|e| e.to_string())?;
    let (status, body) = http.post_text("/workflows", &workflow_text);
    if status != 201 && body["code"] != "WORKFLOW_EXISTS" {
        return Err(format!("create workflow: {status} {body}"));
    }
    let fixture_text = std::fs::read_to_string(&sc.fixture).map_err(|e| e.to_string())?;
    let (status, fixture) = http.post_text("/fixtures", &fixture_text);
    if status != 201 {
        return Err(format!("create fixture: {status} {fixture}"));
    }
    let bundle = match &sc.bundle {
        Some(p) => serde_json::from_str::<Value>(&std::fs::read_to_string(p).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?,
        None => Value::Null,
    };
    let (server_cmds, client_cmds): (Vec<_>, Vec<_>) = sc.control_commands.iter().cloned().partition(is_server_side);
    let mut request = json!({
        "workflow_id": graph.id,
        "fixture_id": fixture["id"],
        "user_query": sc.user_query,
        "gateway": {"kind": "scripted", "script_path": sc.gateway},
        "config": sc.config,
        "control_commands": server_cmds,
    });
    if !bundle.is_null() {
        request["bundle"] = bundle;
    }
    let (status, info) = http.post("/sessions", &request);
    if status != 201 {
        return Err(format!("create session: {status} {info}"));
    }
    let id = info["id"].as_str().ok_or("session id")?.to_string();

    let mut responses = sc.scripted_user_responses.iter();
    let mut pending = client_cmds.iter().peekable();
    let info = loop {
        let info = http.settle(&id);
        let steps = info["step_count"].as_u64().unwrap_or(0) as usize;
        match state_name(&info) {
            "awaiting_user" => {
                let r = responses.next().ok_or("RESPONSES_EXHAUSTED")?;
                let (s, b) = http.post(&format!("/sessions/{id}/response"), &serde_json::to_value(r).unwrap());
                if s != 202 {
                    return Err(format!("response: {s} {b}"));
                }
            }
            "paused" => {
                let c = pending.next_if(|c| steps >= c.after_step).ok_or("STALLED")?;
                let (s, b) = match &c.command {
                    Command::Resume => http.post_empty(&format!("/sessions/{id}/resume")),
                    Command::UserAction(a) => {
                        http.post(&format!("/sessions/{id}/user-action"), &serde_json::to_value(a).unwrap())
                    }
                    _ => unreachable!("sent with the request"),
                };
                if s != 202 {
                    return Err(format!("{:?}: {s} {b}", c.command));
                }
            }
            "completed" | "failed" | "cancelled" => break info,
            other => return Err(format!("unexpected state {other}")),
        }
    };
    let events = http.events(&format!("/sessions/{id}/events?from_seq=0"));
    let (status, trace_text) = http.get_text(&format!("/sessions/{id}/trace"));
    if status != 200 {
        return Err(format!("trace: {status}"));
    }
    Ok(ApiRun {
        session: id,
        info,
        trace_text,
        events,
    })
}
