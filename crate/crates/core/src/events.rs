//! Ordered, replayable per-session event stream.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    UserVisible,
    Debug,
}

impl Channel {
    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "user_visible" => Some(Channel::UserVisible),
            "debug" => Some(Channel::Debug),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    AgentMessage,
    ActionNotice,
    Plan,
    Ask,
    ConfirmRequest,
    UserMessage,
    Status,
    ToolCall,
    Reasoning,
    EnvHighlight,
}

impl EventKind {
    /// Kinds that may only travel on the debug channel.
    pub fn debug_only(self) -> bool {
        matches!(self, EventKind::ToolCall | EventKind::Reasoning)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatEvent {
    pub seq: u64,
    pub channel: Channel,
    pub kind: EventKind,
    pub payload: Value,
    pub step_index: Option<usize>,
    pub timestamp: u64,
}

impl ChatEvent {
    /// An event not yet placed in a stream (`seq` and `timestamp` are 0).
    pub fn draft(channel: Channel, kind: EventKind, payload: Value, step_index: Option<usize>) -> Self {
        debug_assert!(channel == Channel::Debug || !kind.debug_only());
        ChatEvent {
            seq: 0,
            channel,
            kind,
            payload,
            step_index,
            timestamp: 0,
        }
    }
}

/// Source of event and record timestamps, in milliseconds.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

/// Counts up by one per reading. Makes scripted runs byte-reproducible.
#[derive(Debug, Default)]
pub struct LogicalClock(AtomicU64);

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.0.fetch_add(1, Ordering::SeqCst)
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

#[derive(Debug, Default)]
struct LogState {
    events: Vec<ChatEvent>,
    closed: bool,
}

/// Append-only event log shared by the session (writer) and any number of
/// subscribers. Sequence numbers are dense from 0.
#[derive(Clone)]
pub struct EventLog {
    inner: Arc<(Mutex<LogState>, Condvar)>,
    clock: Arc<dyn Clock>,
}

impl std::fmt::Debug for EventLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EventLog").field("len", &self.len()).finish()
    }
}

impl EventLog {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        EventLog {
            inner: Arc::new((Mutex::new(LogState::default()), Condvar::new())),
            clock,
        }
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    /// Stamps `draft` with the next sequence number and a timestamp.
    pub fn push(&self, mut draft: ChatEvent) -> ChatEvent {
        let (lock, cv) = &*self.inner;
        let mut state = lock.lock().expect("event log poisoned");
        draft.seq = state.events.len() as u64;
        draft.timestamp = self.clock.now_ms();
        state.events.push(draft.clone());
        cv.notify_all();
        draft
    }

    pub fn len(&self) -> usize {
        self.inner.0.lock().expect("event log poisoned").events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Events with `seq >= from_seq` on any of `channels`.
    pub fn since(&self, from_seq: u64, channels: &[Channel]) -> Vec<ChatEvent> {
        let state = self.inner.0.lock().expect("event log poisoned");
        state
            .events
            .iter()
            .skip(from_seq as usize)
            .filter(|e| channels.contains(&e.channel))
            .cloned()
            .collect()
    }

    /// Marks the log complete; waiting subscribers wake up.
    pub fn close(&self) {
        let (lock, cv) = &*self.inner;
        lock.lock().expect("event log poisoned").closed = true;
        cv.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.inner.0.lock().expect("event log poisoned").closed
    }

    /// Blocks until the log holds more than `seen` events, is closed, or
    /// `timeout` passes. Returns the current length.
    pub fn wait_beyond(&self, seen: usize, timeout: Duration) -> usize {
        let (lock, cv) = &*self.inner;
        let state = lock.lock().expect("event log poisoned");
        let (state, _) = cv
            .wait_timeout_while(state, timeout, |s| s.events.len() <= seen && !s.closed)
            .expect("event log poisoned");
        state.events.len()
    }
}
