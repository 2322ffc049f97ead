//! The information-flow orchestrator loop.
//!
//! One directive is in flight at a time. After each inquiry or instruction
//! the orchestrator waits for exactly one mention, then decides again. Bus
//! refusals and wait timeouts are fed back as `[note]` observations.

use std::time::{Duration, Instant};

use infoflow_core::directive::DirectiveAction;
use infoflow_core::prompts::ORCHESTRATOR_FORMAT_NOTE;
use infoflow_core::script::{assemble_context, Segment, DEFAULT_SEGMENT_BUDGET};
use infoflow_core::text::normalize_answer;
use infoflow_core::trace::{EventKind, Payload};
use infoflow_core::{
    enforce_budget, parse_directive, AgentId, BudgetStatus, Directive, Message, MessageKind, ReportStatus, Role,
    SubmissionRecord, WorkerReport, UNRESOLVED,
};

use crate::backend::{Backend, Completion};
use crate::bus::{BusError, Handle};
use crate::error::RunError;

pub const DEFAULT_MAX_REPROMPTS: u32 = 2;
pub const FALLBACK_INQUIRY: &str = "status?";

#[derive(Clone, Debug)]
pub struct OrchestratorConfig {
    pub prompt: String,
    /// Extra system segment after the prompt; set for live models.
    pub format_note: Option<String>,
    pub segment_budget: usize,
    pub budget: Duration,
    /// Longest single wait for a mention.
    pub wait_slice: Duration,
    pub max_reprompts: u32,
}

impl OrchestratorConfig {
    pub fn new(prompt: impl Into<String>, budget: Duration, wait_slice: Duration) -> Self {
        Self {
            prompt: prompt.into(),
            format_note: None,
            segment_budget: DEFAULT_SEGMENT_BUDGET,
            budget,
            wait_slice,
            max_reprompts: DEFAULT_MAX_REPROMPTS,
        }
    }
}

struct Loop<'a> {
    handle: &'a Handle,
    backend: &'a mut dyn Backend,
    cfg: &'a OrchestratorConfig,
    started: Instant,
    me: AgentId,
    observations: Vec<Segment>,
    turn: u64,
}

/// Runs until a submission is stored. `started` is the session clock origin.
pub fn orchestrate(
    handle: &Handle,
    backend: &mut dyn Backend,
    cfg: &OrchestratorConfig,
    started: Instant,
) -> Result<SubmissionRecord, RunError> {
    let me = handle.agent().clone();
    let mut l = Loop { handle, backend, cfg, started, me, observations: Vec::new(), turn: 0 };
    l.run()
}

impl Loop<'_> {
    fn remaining(&self) -> Option<Duration> {
        let elapsed = self.started.elapsed();
        match enforce_budget(self.cfg.budget, elapsed) {
            BudgetStatus::WithinBudget => Some(self.cfg.budget - elapsed),
            BudgetStatus::MustSubmit => None,
        }
    }

    fn emit(&self, kind: EventKind, payload: Payload, tokens: u64) {
        self.handle.bus().tracer().emit(kind, payload, tokens);
    }

    fn note(&mut self, text: String) {
        self.emit(
            EventKind::Observe,
            Payload { agent: Some(self.me.to_string()), detail: Some(text.clone()), ..Payload::default() },
            0,
        );
        self.observations.push(Segment::note(text));
    }

    fn run(&mut self) -> Result<SubmissionRecord, RunError> {
        // the query intake
        loop {
            let Some(left) = self.remaining() else { return self.force_submit() };
            match self.handle.wait_for_mention(left.min(self.cfg.wait_slice)) {
                Ok(m) => {
                    self.observations.push(Segment::from_message(&m, &self.me));
                    break;
                }
                Err(BusError::WaitTimeout(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }

        loop {
            if self.remaining().is_none() {
                return self.force_submit();
            }
            let directive = self.decide()?;
            match directive.action {
                DirectiveAction::Submit => {
                    if let Some(record) = self.try_submit(&directive)? {
                        return Ok(record);
                    }
                }
                DirectiveAction::Inquiry | DirectiveAction::Instruction => {
                    if self.dispatch(&directive)? {
                        if let Some(record) = self.await_reply()? {
                            return Ok(record);
                        }
                    }
                }
            }
        }
    }

    fn context(&self, extra: Option<Segment>) -> Vec<Segment> {
        let mut view = self.observations.clone();
        view.extend(extra);
        assemble_context(&self.cfg.prompt, self.cfg.format_note.as_deref(), &view, self.cfg.segment_budget)
    }

    fn complete(&mut self, context: &[Segment]) -> Result<Completion, RunError> {
        self.backend.complete(context).map_err(|source| RunError::Backend { agent: self.me.to_string(), source })
    }

    fn trace_decide(&self, c: &Completion, error: Option<String>) {
        self.emit(
            EventKind::Decide,
            Payload {
                agent: Some(self.me.to_string()),
                turn: Some(self.turn),
                completion: Some(c.text.clone()),
                prompt_tokens: Some(c.usage.prompt_tokens),
                completion_tokens: Some(c.usage.completion_tokens),
                usage_source: Some(c.usage.source),
                error,
                ..Payload::default()
            },
            c.usage.total(),
        );
    }

    /// One decision, with bounded re-prompting on malformed output.
    fn decide(&mut self) -> Result<Directive, RunError> {
        let mut reminder = None;
        for _ in 0..=self.cfg.max_reprompts {
            let ctx = self.context(reminder.take());
            let c = self.complete(&ctx)?;
            match parse_directive(&c.text) {
                Ok(d) => {
                    self.trace_decide(&c, None);
                    return Ok(d);
                }
                Err(e) => {
                    self.trace_decide(&c, Some(e.to_string()));
                    reminder = Some(Segment::note(format!("{e}. {ORCHESTRATOR_FORMAT_NOTE}")));
                }
            }
        }
        let roster = self.handle.bus().roster();
        let planner = roster.agent_for(Role::Planner).cloned().ok_or(RunError::NoFallbackTarget)?;
        self.emit(
            EventKind::Warning,
            Payload {
                agent: Some(self.me.to_string()),
                detail: Some("decision output malformed after re-prompts; falling back to a status inquiry".into()),
                ..Payload::default()
            },
            0,
        );
        Directive::inquiry(planner, FALLBACK_INQUIRY).map_err(|e| RunError::Internal(e.to_string()))
    }

    /// Sends an inquiry or instruction; false if the bus refused it.
    fn dispatch(&mut self, d: &Directive) -> Result<bool, RunError> {
        let roster = self.handle.bus().roster();
        let named = d.target.as_ref().map(|t| t.as_str()).unwrap_or_default();
        let Some(target) = roster.resolve(named).cloned() else {
            self.note(format!("no agent named {named}"));
            return Ok(false);
        };
        let kind = d.action.message_kind().unwrap_or(MessageKind::Instruction);
        self.emit(
            EventKind::Dispatch,
            Payload {
                agent: Some(self.me.to_string()),
                action: Some(d.action),
                target: Some(target.to_string()),
                turn: Some(self.turn),
                criteria: d.criteria.clone(),
                prune: d.prune.clone(),
                content: Some(d.content.clone()),
                ..Payload::default()
            },
            0,
        );
        match self.handle.send(&target, &d.content, kind, self.turn) {
            Ok(id) => {
                let msg = Message::new(id, self.me.clone(), target, d.content.clone(), kind, self.turn)
                    .map_err(|e| RunError::Internal(e.to_string()))?;
                self.observations.push(Segment::from_message(&msg, &self.me));
                self.turn += 1;
                Ok(true)
            }
            Err(BusError::Closed) => Err(BusError::Closed.into()),
            Err(e) => {
                self.note(format!("message to {target} was not delivered: {e}"));
                Ok(false)
            }
        }
    }

    /// Waits for one mention. Returns a record only if the budget ran out.
    fn await_reply(&mut self) -> Result<Option<SubmissionRecord>, RunError> {
        let Some(left) = self.remaining() else { return self.force_submit().map(Some) };
        match self.handle.wait_for_mention(left.min(self.cfg.wait_slice)) {
            Ok(m) => {
                let report = WorkerReport::parse(&m.content).ok().flatten();
                self.emit(
                    EventKind::Observe,
                    Payload {
                        agent: Some(self.me.to_string()),
                        sender: Some(m.sender.to_string()),
                        message_id: Some(m.id),
                        status: report.as_ref().map(|r| r.status),
                        notes: report.and_then(|r| r.notes),
                        ..Payload::default()
                    },
                    0,
                );
                self.observations.push(Segment::from_message(&m, &self.me));
            }
            Err(BusError::WaitTimeout(t)) => {
                if self.remaining().is_none() {
                    return self.force_submit().map(Some);
                }
                self.note(format!("no response within {} ms", t.as_millis()));
            }
            Err(e) => return Err(e.into()),
        }
        if self.remaining().is_none() {
            return self.force_submit().map(Some);
        }
        Ok(None)
    }

    fn try_submit(&mut self, d: &Directive) -> Result<Option<SubmissionRecord>, RunError> {
        let history = self.handle.bus().history();
        match confirmer(history.messages(), &self.me, &d.content) {
            Some(by) => {
                let record = SubmissionRecord::consensus(d.content.clone(), self.started.elapsed(), by);
                Ok(Some(self.handle.bus().submit(record)?))
            }
            None => {
                self.note(format!(
                    "submission refused: no agent has confirmed \"{}\"; send it to an agent for confirmation first",
                    d.content
                ));
                Ok(None)
            }
        }
    }

    fn force_submit(&mut self) -> Result<SubmissionRecord, RunError> {
        let history = self.handle.bus().history();
        let answer = best_so_far(history.messages());
        let record = SubmissionRecord::budget_exhausted(answer, self.started.elapsed());
        Ok(self.handle.bus().submit(record)?)
    }
}

fn status_of(content: &str) -> ReportStatus {
    match WorkerReport::parse(content) {
        Ok(Some(r)) => r.status,
        _ => infoflow_core::report::infer_status(content),
    }
}

/// Agent that confirmed `answer`: the orchestrator sent it a message
/// containing the answer and its next reply reported complete. The latest
/// such exchange wins.
pub fn confirmer(history: &[Message], orchestrator: &AgentId, answer: &str) -> Option<AgentId> {
    let wanted = normalize_answer(answer);
    if wanted.is_empty() {
        return None;
    }
    history.iter().enumerate().rev().find_map(|(i, m)| {
        if &m.sender != orchestrator || !normalize_answer(&m.content).contains(&wanted) {
            return None;
        }
        let reply = history[i + 1..].iter().find(|r| r.sender == m.recipient && &r.recipient == orchestrator)?;
        (status_of(&reply.content) == ReportStatus::Complete).then(|| m.recipient.clone())
    })
}

/// Latest answer proposal in the transcript, or the fixed placeholder.
pub fn best_so_far(history: &[Message]) -> String {
    history
        .iter()
        .rev()
        .find(|m| m.kind == MessageKind::AnswerProposal)
        .map(|m| match WorkerReport::parse(&m.content) {
            Ok(Some(r)) if !r.body.trim().is_empty() => r.body.trim().to_string(),
            _ => m.content.trim().to_string(),
        })
        .unwrap_or_else(|| UNRESOLVED.to_string())
}
