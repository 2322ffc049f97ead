//! Deterministic replay: rebuild a session from its trace, feed every agent
//! the completions and tool results it recorded, and compare the new trace
//! with the old one.

use std::collections::BTreeMap;
use std::time::Duration;

use infoflow_core::trace::{check_sequence, EventKind, TraceEvent};
use infoflow_core::{AgentId, AgentRoster, Role, TokenUsage, ToolResult, UsageSource};

use crate::backend::{Backend, Completion, Recorded, ReplayBackend};
use crate::bus::Bus;
use crate::error::RunError;
use crate::session::{run_session, AgentFactory, SessionInput, Settings};
use crate::tools::{ReplayTools, ToolBox};
use crate::trace::to_jsonl;
use crate::worker::ViewMode;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("trace is empty")]
    Empty,
    #[error("trace has no start event")]
    NoStart,
    #[error("start event lacks {0}")]
    MissingField(&'static str),
    #[error("sequence numbers do not increase at seq {0}")]
    Sequence(u64),
    #[error("invalid roster in start event: {0}")]
    Roster(String),
    #[error(transparent)]
    Run(#[from] RunError),
}

#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub original: Vec<TraceEvent>,
    pub replayed: Vec<TraceEvent>,
    /// Index of the first differing line, if any.
    pub first_difference: Option<usize>,
}

impl ReplayOutcome {
    pub fn identical(&self) -> bool {
        self.first_difference.is_none()
    }
}

#[derive(Default)]
struct Recording {
    backend: BTreeMap<String, Vec<Recorded>>,
    tools: BTreeMap<String, Vec<ToolResult>>,
}

impl AgentFactory for Recording {
    fn backend(&mut self, agent: &AgentId, _role: Role, _bus: &Bus) -> Result<Box<dyn Backend>, RunError> {
        Ok(Box::new(ReplayBackend::new(self.backend.remove(agent.as_str()).unwrap_or_default())))
    }

    fn tools(&mut self, agent: &AgentId, _role: Role) -> Box<dyn ToolBox> {
        Box::new(ReplayTools::new(self.tools.remove(agent.as_str()).unwrap_or_default()))
    }
}

fn record(events: &[TraceEvent]) -> Recording {
    let mut rec = Recording::default();
    for e in events {
        let p = &e.payload;
        let Some(agent) = p.agent.clone() else { continue };
        let step = match e.kind {
            EventKind::Decide | EventKind::ToolInvoke | EventKind::Respond => p.completion.as_ref().map(|text| {
                let usage = TokenUsage {
                    prompt_tokens: p.prompt_tokens.unwrap_or(0),
                    completion_tokens: p.completion_tokens.unwrap_or(0),
                    source: p.usage_source.unwrap_or(UsageSource::Reported),
                };
                Recorded::Completion(Completion { text: text.clone(), usage })
            }),
            EventKind::Warning => match p.error.as_deref() {
                Some("script_gap") => Some(Recorded::Gap(p.detail.clone().unwrap_or_default())),
                Some("backend_failure") => Some(Recorded::Failure(p.detail.clone().unwrap_or_default())),
                _ => None,
            },
            EventKind::ToolResult if p.error.as_deref() != Some("unknown_tool") => {
                let tool = p.tool.clone().unwrap_or_default();
                let output = p.output.clone().unwrap_or_default();
                let r = if p.ok.unwrap_or(true) { ToolResult::ok(tool, output) } else { ToolResult::error(tool, output) };
                rec.tools.entry(agent.clone()).or_default().push(r);
                None
            }
            _ => None,
        };
        if let Some(step) = step {
            rec.backend.entry(agent).or_default().push(step);
        }
    }
    rec
}

/// Session input and settings recorded in the start event.
pub fn session_from_trace(events: &[TraceEvent]) -> Result<(SessionInput, Settings), ReplayError> {
    let first = events.first().ok_or(ReplayError::Empty)?;
    let start = events.iter().find(|e| e.kind == EventKind::Start).ok_or(ReplayError::NoStart)?;
    let p = &start.payload;
    let roster = AgentRoster::new(p.roster.clone()).map_err(|e| ReplayError::Roster(e.to_string()))?;
    let input = SessionInput {
        id: first.session.clone(),
        scenario: p.scenario.clone().unwrap_or_default(),
        query: p.query.clone().ok_or(ReplayError::MissingField("query"))?,
        roster,
        expected_answer: p.expected_answer.clone(),
    };
    let defaults = Settings::default();
    let settings = Settings {
        mode: first.mode,
        seed: p.seed.unwrap_or(0),
        budget: p.budget_ms.map(Duration::from_millis).unwrap_or(defaults.budget),
        wait_timeout: p.wait_timeout_ms.map(Duration::from_millis).unwrap_or(defaults.wait_timeout),
        view: p.view.as_deref().and_then(ViewMode::parse).unwrap_or_default(),
        segment_budget: p.segment_budget.unwrap_or(defaults.segment_budget),
        max_replans: p.max_replans.unwrap_or(defaults.max_replans),
        ..defaults
    };
    Ok((input, settings))
}

fn strip_wall(events: &[TraceEvent]) -> Vec<TraceEvent> {
    events.iter().cloned().map(|mut e| {
        e.wall_ms = None;
        e
    }).collect()
}

/// Re-runs a recorded session. Wall-clock offsets are ignored when comparing.
pub fn replay(events: &[TraceEvent]) -> Result<ReplayOutcome, ReplayError> {
    check_sequence(events).map_err(ReplayError::Sequence)?;
    let (input, settings) = session_from_trace(events)?;
    let mut rec = record(events);
    let out = run_session(&input, &settings, &mut rec)?;
    let original = strip_wall(events);
    let a = to_jsonl(&original);
    let b = to_jsonl(&out.events);
    let first_difference = if a == b {
        None
    } else {
        let (al, bl): (Vec<&str>, Vec<&str>) = (a.lines().collect(), b.lines().collect());
        Some((0..al.len().max(bl.len())).find(|&i| al.get(i) != bl.get(i)).unwrap_or(0))
    };
    Ok(ReplayOutcome { original, replayed: out.events, first_difference })
}

