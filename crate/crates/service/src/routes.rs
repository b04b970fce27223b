//! HTTP surface.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | GET | `/workflows` | | `[{id, name, revision}]` |
//! | POST | `/workflows` | workflow document | 201, the document |
//! | GET | `/workflows/{id}` | | the document |
//! | PUT | `/workflows/{id}` | document at the stored revision | the document at the next revision |
//! | POST | `/workflows/{id}/compile` | `{bundle?, gateway?}` | `{path_text, workflow_prompt, system_prompt, truncated, warnings}` |
//! | POST | `/workflows/{id}/generate` | `{edited_prompt, gateway?}` | the next revision |
//! | GET | `/fixtures` | | `[id]` |
//! | POST | `/fixtures` | fixture | 201, `{id}` |
//! | GET | `/fixtures/{id}` | | the fixture |
//! | GET | `/sessions` | | `[session info]` |
//! | POST | `/sessions` | session request | 201, session info |
//! | GET | `/sessions/{id}` | | session info |
//! | POST | `/sessions/{id}/pause`, `/resume`, `/cancel` | | 202, `{state}` |
//! | POST | `/sessions/{id}/response` | `{type, value}` | 202, `{state}` |
//! | POST | `/sessions/{id}/user-action` | environment action | 202, `{state, result}` |
//! | GET | `/sessions/{id}/trace` | | trace file (JSON Lines) |
//! | GET | `/sessions/{id}/trace/{n}` | | step record |
//! | GET | `/sessions/{id}/events?channels=&from_seq=` | | server-sent events |
//!
//! Errors are `{status, code, message}`.

use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use flowbench::compiler::{compile, generate_workflow_from_prompt, PromptBundle};
use flowbench::events::{Channel, ChatEvent};
use flowbench::gateway::BackendConfig;
use flowbench::runtime::UserResponse;
use flowbench::sim::EnvAction;
use flowbench::trace::import;
use flowbench::workflow::{deserialize, WorkflowGraph};

use crate::error::ApiError;
use crate::sessions::{LiveSession, SessionRequest, Sessions};
use crate::store::Store;

pub struct AppState {
    pub store: Store,
    pub sessions: Sessions,
    pub default_gateway: BackendConfig,
    /// Serializes read-modify-write on workflow documents.
    workflow_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(store: Store, default_gateway: BackendConfig) -> Result<Arc<AppState>, ApiError> {
        Ok(Arc::new(AppState {
            sessions: Sessions::new(store.clone(), default_gateway.clone())?,
            store,
            default_gateway,
            workflow_lock: tokio::sync::Mutex::new(()),
        }))
    }
}

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/workflows", get(list_workflows).post(create_workflow))
        .route("/workflows/{id}", get(get_workflow).put(update_workflow))
        .route("/workflows/{id}/compile", post(compile_workflow))
        .route("/workflows/{id}/generate", post(generate_workflow))
        .route("/fixtures", get(list_fixtures).post(create_fixture))
        .route("/fixtures/{id}", get(get_fixture))
        .route("/sessions", get(list_sessions).post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/pause", post(pause))
        .route("/sessions/{id}/resume", post(resume))
        .route("/sessions/{id}/cancel", post(cancel))
        .route("/sessions/{id}/response", post(respond))
        .route("/sessions/{id}/user-action", post(user_action))
        .route("/sessions/{id}/trace", get(get_trace))
        .route("/sessions/{id}/trace/{n}", get(get_trace_step))
        .route("/sessions/{id}/events", get(events))
        .fallback(|| async { ApiError::new("NOT_FOUND", "no such route") })
        .with_state(state)
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request(e.to_string()))
}

/// Like [`body`], with an empty body meaning `T::default()`.
fn optional_body<T: DeserializeOwned + Default>(bytes: &Bytes) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        Ok(T::default())
    } else {
        body(bytes)
    }
}

fn document(bytes: &Bytes) -> ApiResult<WorkflowGraph> {
    let text = std::str::from_utf8(bytes).map_err(|e| ApiError::bad_request(e.to_string()))?;
    Ok(deserialize(text)?)
}

fn doc_response(status: StatusCode, graph: &WorkflowGraph) -> Response {
    (status, Json(flowbench::workflow::to_value(graph))).into_response()
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

async fn list_workflows(State(app): Shared) -> ApiResult<Response> {
    Ok(Json(app.store.list_workflows()?).into_response())
}

async fn create_workflow(State(app): Shared, bytes: Bytes) -> ApiResult<Response> {
    let graph = document(&bytes)?;
    let _guard = app.workflow_lock.lock().await;
    app.store.create_workflow(&graph)?;
    Ok(doc_response(StatusCode::CREATED, &graph))
}

async fn get_workflow(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(doc_response(StatusCode::OK, &app.store.get_workflow(&id)?))
}

async fn update_workflow(State(app): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let graph = document(&bytes)?;
    let _guard = app.workflow_lock.lock().await;
    let next = app.store.update_workflow(&id, &graph)?;
    Ok(doc_response(StatusCode::OK, &next))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompileRequest {
    #[serde(default)]
    bundle: PromptBundle,
    #[serde(default)]
    gateway: Option<BackendConfig>,
}

async fn compile_workflow(State(app): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req: CompileRequest = optional_body(&bytes)?;
    let graph = app.store.get_workflow(&id)?;
    let gateway = req.gateway.unwrap_or_else(|| app.default_gateway.clone());
    let compiled = blocking(move || {
        gateway.validate()?;
        let mut backend = gateway.build()?;
        Ok(compile(&graph, &req.bundle, Some(backend.as_mut()))?)
    })
    .await?;
    Ok(Json(compiled).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateRequest {
    edited_prompt: String,
    #[serde(default)]
    gateway: Option<BackendConfig>,
}

async fn generate_workflow(State(app): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let req: GenerateRequest = body(&bytes)?;
    let _guard = app.workflow_lock.lock().await;
    let current = app.store.get_workflow(&id)?;
    let gateway = req.gateway.unwrap_or_else(|| app.default_gateway.clone());
    let next = blocking(move || {
        gateway.validate()?;
        let mut backend = gateway.build()?;
        Ok(generate_workflow_from_prompt(&req.edited_prompt, &current, backend.as_mut())?)
    })
    .await?;
    app.store.put_next_revision(&next)?;
    Ok(doc_response(StatusCode::OK, &next))
}

async fn list_fixtures(State(app): Shared) -> ApiResult<Response> {
    Ok(Json(app.store.list_fixtures()?).into_response())
}

async fn create_fixture(State(app): Shared, bytes: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&bytes).map_err(|e| ApiError::bad_request(e.to_string()))?;
    let site = app.store.put_fixture(text)?;
    Ok((StatusCode::CREATED, Json(json!({ "id": site.id })))
        .into_response())
}

async fn get_fixture(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let text = app.store.fixture_text(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

async fn list_sessions(State(app): Shared) -> ApiResult<Response> {
    Ok(Json(app.sessions.list()?).into_response())
}

async fn create_session(State(app): Shared, bytes: Bytes) -> ApiResult<Response> {
    let req: SessionRequest = body(&bytes)?;
    let app2 = app.clone();
    let live = blocking(move || app2.sessions.create(req)).await?;
    Ok((StatusCode::CREATED, Json(live.info())).into_response())
}

fn live(app: &AppState, id: &str) -> ApiResult<Arc<LiveSession>> {
    app.sessions
        .get(id)
        .ok_or_else(|| ApiError::new("SESSION_NOT_FOUND", format!("no live session {id:?}")))
}

async fn get_session(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(app.sessions.info(&id)?).into_response())
}

fn accepted(v: Value) -> Response {
    (StatusCode::ACCEPTED, Json(v)).into_response()
}

async fn pause(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(accepted(live(&app, &id)?.pause().await?))
}

async fn cancel(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(accepted(live(&app, &id)?.cancel().await?))
}

async fn resume(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(accepted(live(&app, &id)?.resume().await?))
}

async fn respond(State(app): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let response: UserResponse = body(&bytes)?;
    Ok(accepted(live(&app, &id)?.respond(response).await?))
}

async fn user_action(State(app): Shared, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let action: EnvAction = body(&bytes)?;
    Ok(accepted(live(&app, &id)?.user_action(action).await?))
}

async fn get_trace(State(app): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let text = app.sessions.trace_text(&id)?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], text).into_response())
}

async fn get_trace_step(State(app): Shared, Path((id, n)): Path<(String, usize)>) -> ApiResult<Response> {
    let record = match app.sessions.get(&id) {
        Some(s) => (*s.trace.get(n)?).clone(),
        None => {
            let trace = import(&app.sessions.stored_trace(&id)?)?;
            let len = trace.records.len();
            trace.records.into_iter().nth(n).ok_or_else(|| {
                ApiError::new("OUT_OF_RANGE", format!("step {n} out of range for trace of length {len}"))
            })?
        }
    };
    Ok(Json(record).into_response())
}

#[derive(Debug, Deserialize)]
struct EventQuery {
    channels: Option<String>,
    from_seq: Option<u64>,
}

fn parse_channels(spec: Option<&str>) -> ApiResult<Vec<Channel>> {
    match spec {
        None | Some("") => Ok(vec![Channel::UserVisible, Channel::Debug]),
        Some(s) => s
            .split(',')
            .map(|c| {
                Channel::parse(c.trim()).ok_or_else(|| ApiError::new("INVALID_CHANNEL", format!("unknown channel {c:?}")))
            })
            .collect(),
    }
}

fn sse_event(e: &ChatEvent) -> Event {
    let kind = serde_json::to_value(e.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    Event::default()
        .id(e.seq.to_string())
        .event(kind)
        .json_data(e)
        .expect("events serialize")
}

/// Ordered replay from `from_seq`, then live events until the session ends.
async fn events(
    State(app): Shared,
    Path(id): Path<String>,
    Query(q): Query<EventQuery>,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let channels = parse_channels(q.channels.as_deref())?;
    let log = live(&app, &id)?.events.clone();
    let start = q.from_seq.unwrap_or(0);
    let batches = stream::unfold(Some(start), move |cursor| {
        let log = log.clone();
        let channels = channels.clone();
        async move {
            let mut next = cursor?;
            loop {
                // Read before the snapshot so events pushed just before close are not lost.
                let closed = log.is_closed();
                let fresh = log.since(next, &[Channel::UserVisible, Channel::Debug]);
                if let Some(last) = fresh.last() {
                    next = last.seq + 1;
                    let wanted: Vec<_> = fresh.into_iter().filter(|e| channels.contains(&e.channel)).collect();
                    if !wanted.is_empty() {
                        return Some((wanted, Some(next)));
                    }
                    continue;
                }
                if closed {
                    return None;
                }
                let seen = next as usize;
                let waiter = log.clone();
                let _ = tokio::task::spawn_blocking(move || waiter.wait_beyond(seen, Duration::from_millis(500))).await;
            }
        }
    });
    let events = batches.flat_map(|batch| stream::iter(batch.into_iter().map(|e| Ok(sse_event(&e)))));
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}
