//! Execution trace schema.
//!
//! A trace is a sequence of [`TraceEvent`]s with strictly increasing `seq`,
//! persisted one JSON object per line. Payload fields are optional and only
//! those relevant to the event kind are present.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::directive::{DirectiveAction, SubmitReason};
use crate::model::{MessageKind, RosterEntry, UsageSource};
use crate::report::ReportStatus;
use crate::workflow::Judgement;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    A2a,
    Workflow,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::A2a => "a2a",
            Mode::Workflow => "workflow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "a2a" => Some(Mode::A2a),
            "workflow" => Some(Mode::Workflow),
            _ => None,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Session metadata; always the first event.
    Start,
    Send,
    SendRejected,
    Deliver,
    Decide,
    Dispatch,
    Observe,
    ToolInvoke,
    ToolResult,
    Respond,
    Submit,
    BudgetForced,
    Warning,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Start => "start",
            EventKind::Send => "send",
            EventKind::SendRejected => "send_rejected",
            EventKind::Deliver => "deliver",
            EventKind::Decide => "decide",
            EventKind::Dispatch => "dispatch",
            EventKind::Observe => "observe",
            EventKind::ToolInvoke => "tool_invoke",
            EventKind::ToolResult => "tool_result",
            EventKind::Respond => "respond",
            EventKind::Submit => "submit",
            EventKind::BudgetForced => "budget_forced",
            EventKind::Warning => "warning",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, EventKind::Submit | EventKind::BudgetForced)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Payload {
    /// Agent that produced the event.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sender: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recipient: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub msg_kind: Option<MessageKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<DirectiveAction>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub prune: Vec<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub args: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<ReportStatus>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub judgement: Option<Judgement>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtask: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attempt: Option<u32>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<SubmitReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confirmed_by: Option<String>,

    /// Raw backend output, kept so a session can be replayed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_tokens: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usage_source: Option<UsageSource>,

    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,

    // session metadata, carried by `start`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub query: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub roster: Vec<RosterEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wait_timeout_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub view: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segment_budget: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_replans: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_answer: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub session: String,
    pub mode: Mode,
    pub kind: EventKind,
    #[serde(default)]
    pub payload: Payload,
    #[serde(default)]
    pub tokens: u64,
    /// Milliseconds since session start; live runs only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_ms: Option<u64>,
}

/// Checks that `seq` strictly increases.
pub fn check_sequence(events: &[TraceEvent]) -> Result<(), u64> {
    for w in events.windows(2) {
        if w[1].seq <= w[0].seq {
            return Err(w[1].seq);
        }
    }
    Ok(())
}

/// Roster recorded in the `start` event, if any.
pub fn roster_of(events: &[TraceEvent]) -> Option<&[RosterEntry]> {
    events.iter().find(|e| e.kind == EventKind::Start).map(|e| e.payload.roster.as_slice())
}

pub fn mode_of(events: &[TraceEvent]) -> Option<Mode> {
    events.first().map(|e| e.mode)
}

pub fn is_terminal(events: &[TraceEvent]) -> bool {
    events.iter().any(|e| e.kind.is_terminal())
}

/// Sum of per-event token counts.
pub fn total_tokens(events: &[TraceEvent]) -> u64 {
    events.iter().map(|e| e.tokens).sum()
}
