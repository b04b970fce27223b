//! Append-only step trace, JSON Lines export/import and the debug projection.
//!
//! Export layout, one JSON object per line, keys sorted:
//!
//! ```text
//! {"fixture":..,"final_state":..,"format":"flowbench-trace/1","session":..,"steps":N,"type":"header","workflow":..}
//! {"digest":"<sha256 of record>","record":{..StepRecord..},"type":"step"}
//! {"digest":"<sha256 of intervention>","intervention":{..},"type":"user_action"}
//! ```

use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::canonical::{digest_of, to_canonical_value, to_compact};
use crate::events::{Channel, ChatEvent, EventKind};
use crate::gateway::{render_tool_call, GatewayError, Message, ModelOutput, ParseFailure, ToolCall};
use crate::sim::{ActionResult, EnvAction, Observation};

pub const TRACE_FORMAT: &str = "flowbench-trace/1";

/// What the runtime made of one model output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepAction {
    Action {
        call: ToolCall,
        reasoning: String,
        description: String,
    },
    ParseFailure {
        failure: ParseFailure,
    },
    GatewayFailure {
        error: GatewayError,
    },
}

impl StepAction {
    pub fn call(&self) -> Option<&ToolCall> {
        match self {
            StepAction::Action { call, .. } => Some(call),
            _ => None,
        }
    }

    pub fn reasoning(&self) -> &str {
        match self {
            StepAction::Action { reasoning, .. } => reasoning,
            _ => "",
        }
    }
}

/// Everything about one gateway call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step_index: usize,
    pub observation: Observation,
    pub context_digest: String,
    pub input_context: Vec<Message>,
    pub output: Option<ModelOutput>,
    pub parsed_action: StepAction,
    pub env_result: Option<ActionResult>,
    pub events_emitted: Vec<ChatEvent>,
    pub wall_time: u64,
}

/// Stable digest of a context: SHA-256 over its compact canonical JSON.
pub fn context_digest(context: &[Message]) -> String {
    digest_of(&context)
}

/// An environment action the user performed while the session was paused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserIntervention {
    /// Number of steps taken before the action.
    pub after_step: usize,
    pub action: EnvAction,
    pub result: ActionResult,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceHeader {
    pub session: String,
    pub workflow: String,
    pub fixture: String,
    pub final_state: Option<Value>,
}

/// Owned, immutable view of a trace.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<StepRecord>,
    pub interventions: Vec<UserIntervention>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TraceErrorCode {
    IndexGap,
    TraceSealed,
    OutOfRange,
    TamperedRecord,
    MalformedTrace,
}

impl TraceErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceErrorCode::IndexGap => "INDEX_GAP",
            TraceErrorCode::TraceSealed => "TRACE_SEALED",
            TraceErrorCode::OutOfRange => "OUT_OF_RANGE",
            TraceErrorCode::TamperedRecord => "TAMPERED_RECORD",
            TraceErrorCode::MalformedTrace => "MALFORMED_TRACE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}: {message}", code.as_str())]
pub struct TraceError {
    pub code: TraceErrorCode,
    pub message: String,
}

fn trace_err(code: TraceErrorCode, message: impl Into<String>) -> TraceError {
    TraceError {
        code,
        message: message.into(),
    }
}

#[derive(Debug, Default)]
struct Inner {
    header: TraceHeader,
    records: Vec<Arc<StepRecord>>,
    interventions: Vec<UserIntervention>,
    sealed: bool,
}

/// Shared handle: one writer (the session), any number of readers.
/// Stored records are never modified.
#[derive(Debug, Clone, Default)]
pub struct TraceHandle {
    inner: Arc<RwLock<Inner>>,
}

impl TraceHandle {
    pub fn new(session: &str, workflow: &str, fixture: &str) -> Self {
        TraceHandle {
            inner: Arc::new(RwLock::new(Inner {
                header: TraceHeader {
                    session: session.into(),
                    workflow: workflow.into(),
                    fixture: fixture.into(),
                    final_state: None,
                },
                ..Default::default()
            })),
        }
    }

    pub fn append(&self, record: StepRecord) -> Result<(), TraceError> {
        let mut inner = self.inner.write().expect("trace poisoned");
        if inner.sealed {
            return Err(trace_err(TraceErrorCode::TraceSealed, "trace is sealed"));
        }
        if record.step_index != inner.records.len() {
            return Err(trace_err(
                TraceErrorCode::IndexGap,
                format!("expected step {}, got {}", inner.records.len(), record.step_index),
            ));
        }
        inner.records.push(Arc::new(record));
        Ok(())
    }

    pub fn record_intervention(&self, intervention: UserIntervention) -> Result<(), TraceError> {
        let mut inner = self.inner.write().expect("trace poisoned");
        if inner.sealed {
            return Err(trace_err(TraceErrorCode::TraceSealed, "trace is sealed"));
        }
        inner.interventions.push(intervention);
        Ok(())
    }

    pub fn get(&self, index: usize) -> Result<Arc<StepRecord>, TraceError> {
        let inner = self.inner.read().expect("trace poisoned");
        inner.records.get(index).cloned().ok_or_else(|| {
            trace_err(
                TraceErrorCode::OutOfRange,
                format!("step {index} out of range (length {})", inner.records.len()),
            )
        })
    }

    pub fn len(&self) -> usize {
        self.inner.read().expect("trace poisoned").records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_sealed(&self) -> bool {
        self.inner.read().expect("trace poisoned").sealed
    }

    /// Freezes the trace with the session's terminal state.
    pub fn seal(&self, final_state: Value) {
        let mut inner = self.inner.write().expect("trace poisoned");
        if !inner.sealed {
            inner.header.final_state = Some(final_state);
            inner.sealed = true;
        }
    }

    pub fn snapshot(&self) -> Trace {
        let inner = self.inner.read().expect("trace poisoned");
        Trace {
            header: inner.header.clone(),
            records: inner.records.iter().map(|r| (**r).clone()).collect(),
            interventions: inner.interventions.clone(),
        }
    }

    pub fn export(&self) -> String {
        export(&self.snapshot())
    }
}

/// JSON Lines form of `trace`.
pub fn export(trace: &Trace) -> String {
    let h = &trace.header;
    let mut out = to_compact(&json!({
        "type": "header",
        "format": TRACE_FORMAT,
        "session": h.session,
        "workflow": h.workflow,
        "fixture": h.fixture,
        "final_state": h.final_state,
        "steps": trace.records.len(),
    }));
    out.push('\n');
    for r in &trace.records {
        out.push_str(&to_compact(&json!({"type": "step", "digest": digest_of(r), "record": to_canonical_value(r)})));
        out.push('\n');
    }
    for i in &trace.interventions {
        out.push_str(&to_compact(
            &json!({"type": "user_action", "digest": digest_of(i), "intervention": to_canonical_value(i)}),
        ));
        out.push('\n');
    }
    out
}

/// Parses an exported trace, recomputing every digest.
pub fn import(text: &str) -> Result<Trace, TraceError> {
    let malformed = |line: usize, m: &str| trace_err(TraceErrorCode::MalformedTrace, format!("line {line}: {m}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| malformed(1, "missing header"))?;
    let header: Value = serde_json::from_str(first).map_err(|e| malformed(1, &e.to_string()))?;
    if header["type"] != "header" || header["format"] != TRACE_FORMAT {
        return Err(malformed(1, "not a trace header"));
    }
    let text_field = |k: &str| header[k].as_str().unwrap_or_default().to_string();
    let mut trace = Trace {
        header: TraceHeader {
            session: text_field("session"),
            workflow: text_field("workflow"),
            fixture: text_field("fixture"),
            final_state: match &header["final_state"] {
                Value::Null => None,
                v => Some(v.clone()),
            },
        },
        ..Default::default()
    };
    for (i, line) in lines {
        let n = i + 1;
        let v: Value = serde_json::from_str(line).map_err(|e| malformed(n, &e.to_string()))?;
        let digest = v["digest"].as_str().unwrap_or_default();
        match v["type"].as_str() {
            Some("step") => {
                let record: StepRecord =
                    serde_json::from_value(v["record"].clone()).map_err(|e| malformed(n, &e.to_string()))?;
                if digest_of(&record) != digest || context_digest(&record.input_context) != record.context_digest {
                    return Err(trace_err(
                        TraceErrorCode::TamperedRecord,
                        format!("line {n}: step {} digest mismatch", record.step_index),
                    ));
                }
                if record.step_index != trace.records.len() {
                    return Err(trace_err(
                        TraceErrorCode::IndexGap,
                        format!("line {n}: expected step {}, got {}", trace.records.len(), record.step_index),
                    ));
                }
                trace.records.push(record);
            }
            Some("user_action") => {
                let it: UserIntervention =
                    serde_json::from_value(v["intervention"].clone()).map_err(|e| malformed(n, &e.to_string()))?;
                if digest_of(&it) != digest {
                    return Err(trace_err(
                        TraceErrorCode::TamperedRecord,
                        format!("line {n}: user action digest mismatch"),
                    ));
                }
                trace.interventions.push(it);
            }
            _ => return Err(malformed(n, "unknown line type")),
        }
    }
    if header["steps"].as_u64() != Some(trace.records.len() as u64) {
        return Err(trace_err(TraceErrorCode::TamperedRecord, "header step count does not match"));
    }
    Ok(trace)
}

/// The two debug bubbles for a step: the tool call, then the reasoning.
pub fn debug_projection(record: &StepRecord) -> Vec<ChatEvent> {
    let step = Some(record.step_index);
    let raw = record.output.as_ref().map(|o| o.raw.clone()).unwrap_or_default();
    let tool_call = match &record.parsed_action {
        StepAction::Action { call, .. } => json!({
            "tool": call.name(),
            "args": call.arguments(),
            "call": render_tool_call(call),
        }),
        StepAction::ParseFailure { failure } => json!({
            "error": failure.code.as_str(),
            "message": failure.message,
            "raw": failure.raw,
        }),
        StepAction::GatewayFailure { error } => json!({
            "error": error.code.as_str(),
            "message": error.message,
            "raw": raw,
        }),
    };
    let reasoning = record.parsed_action.reasoning();
    vec![
        ChatEvent::draft(Channel::Debug, EventKind::ToolCall, tool_call, step),
        ChatEvent::draft(
            Channel::Debug,
            EventKind::Reasoning,
            json!({"text": reasoning, "empty": reasoning.is_empty()}),
            step,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gateway::ParseFailureCode;
    use crate::sim::{observe, Viewport};

    pub(crate) fn record(i: usize, reasoning: &str) -> StepRecord {
        let site = fixtures::coffee_shop();
        let input_context = vec![Message::system("sys"), Message::user(format!("step {i}"))];
        let call = ToolCall::Click { element: "menu-link".into() };
        StepRecord {
            step_index: i,
            observation: observe(&site, &Viewport::default()),
            context_digest: context_digest(&input_context),
            input_context,
            output: Some(ModelOutput::call(&call, reasoning)),
            parsed_action: StepAction::Action {
                call,
                reasoning: reasoning.into(),
                description: "Click \"MENU\"".into(),
            },
            env_result: None,
            events_emitted: vec![],
            wall_time: i as u64,
        }
    }

    #[test]
    fn append_and_get() {
        let t = TraceHandle::new("s", "w", "f");
        t.append(record(0, "r")).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(*t.get(0).unwrap(), record(0, "r"));
        assert_eq!(t.get(1).unwrap_err().code, TraceErrorCode::OutOfRange);
    }

    #[test]
    fn gap_and_seal_rejected() {
        let t = TraceHandle::new("s", "w", "f");
        t.append(record(0, "r")).unwrap();
        assert_eq!(t.append(record(2, "r")).unwrap_err().code, TraceErrorCode::IndexGap);
        t.seal(json!({"state": "completed"}));
        assert_eq!(t.append(record(1, "r")).unwrap_err().code, TraceErrorCode::TraceSealed);
    }

    #[test]
    fn round_trip_three_steps() {
        let t = TraceHandle::new("s", "w", "f");
        for i in 0..3 {
            t.append(record(i, "why")).unwrap();
        }
        t.seal(json!({"state": "completed"}));
        let snap = t.snapshot();
        assert_eq!(import(&export(&snap)).unwrap(), snap);
    }

    #[test]
    fn empty_trace_is_header_only() {
        let t = TraceHandle::new("s", "w", "f");
        let text = t.export();
        assert_eq!(text.lines().count(), 1);
        assert!(import(&text).unwrap().records.is_empty());
    }

    #[test]
    fn edited_reasoning_is_tampering() {
        let t = TraceHandle::new("s", "w", "f");
        t.append(record(0, "original reasoning")).unwrap();
        let text = t.export().replace("original reasoning", "edited reasoning");
        assert_eq!(import(&text).unwrap_err().code, TraceErrorCode::TamperedRecord);
    }

    #[test]
    fn dropped_line_detected() {
        let t = TraceHandle::new("s", "w", "f");
        t.append(record(0, "a")).unwrap();
        t.append(record(1, "b")).unwrap();
        let exported = t.export();
        let text: Vec<&str> = exported.lines().collect();
        let cut = format!("{}\n{}\n", text[0], text[2]);
        assert!(import(&cut).is_err());
    }

    #[test]
    fn debug_projection_is_call_then_reasoning() {
        let ev = debug_projection(&record(0, "menu first"));
        assert_eq!(ev.len(), 2);
        assert_eq!(ev[0].kind, EventKind::ToolCall);
        assert_eq!(ev[0].payload["tool"], "click");
        assert_eq!(ev[1].payload["text"], "menu first");
        assert!(ev.iter().all(|e| e.channel == Channel::Debug));
    }

    #[test]
    fn parse_failure_projection_carries_raw_and_code() {
        let mut r = record(0, "");
        r.parsed_action = StepAction::ParseFailure {
            failure: ParseFailure::new(ParseFailureCode::NoCallFound, "hmm", "none"),
        };
        let ev = debug_projection(&r);
        assert_eq!(ev[0].payload["raw"], "hmm");
        assert_eq!(ev[0].payload["error"], "NO_CALL_FOUND");
        assert_eq!(ev[1].payload["empty"], true);
    }

    #[test]
    fn readers_see_stable_records() {
        let t = TraceHandle::new("s", "w", "f");
        t.append(record(0, "a")).unwrap();
        let first = t.get(0).unwrap();
        let reader = t.clone();
        let h = std::thread::spawn(move || (0..100).map(|_| reader.get(0).unwrap()).collect::<Vec<_>>());
        for i in 1..50 {
            t.append(record(i, "b")).unwrap();
        }
        for r in h.join().unwrap() {
            assert_eq!(r, first);
        }
    }
}
