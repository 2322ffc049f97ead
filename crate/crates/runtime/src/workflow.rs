//! Workflow-decision-tree controller used as the comparison arm.
//!
//! Registered under the orchestrator's id, it asks the planner for a plan,
//! runs the subtasks in order on keyword-routed workers, and re-decomposes
//! the whole task when a worker reports failure. Partial reports count as
//! success. After the last allowed replan it assembles whatever it has.

use std::time::{Duration, Instant};

use infoflow_core::trace::{EventKind, Payload};
use infoflow_core::workflow::{
    assemble_request, decompose_request, pending_states, replan_request, route_subtask, subtask_request,
    trajectory_line, Judgement, ReplanCounter, SubtaskState,
};
use infoflow_core::{
    enforce_budget, parse_tasks, AgentId, BudgetStatus, DirectiveAction, Message, MessageKind, ReportStatus, Role,
    SubmissionRecord, SubmitReason, SubtaskList, WorkerReport,
};

use crate::bus::{BusError, Handle};
use crate::error::RunError;
use crate::orchestrator::best_so_far;

#[derive(Clone, Debug)]
pub struct WorkflowConfig {
    pub budget: Duration,
    pub wait_slice: Duration,
    pub max_replans: u32,
}

enum Outcome<T> {
    Done(T),
    OutOfTime,
}

struct Controller<'a> {
    handle: &'a Handle,
    cfg: &'a WorkflowConfig,
    started: Instant,
    me: AgentId,
    planner: AgentId,
    query: String,
    turn: u64,
}

pub fn run_workflow(handle: &Handle, cfg: &WorkflowConfig, started: Instant) -> Result<SubmissionRecord, RunError> {
    let bus = handle.bus();
    let roster = bus.roster();
    let planner = roster.agent_for(Role::Planner).cloned().ok_or_else(|| RunError::MissingRole("planner".into()))?;
    let mut c =
        Controller { handle, cfg, started, me: handle.agent().clone(), planner, query: bus.query(), turn: 0 };
    match c.run()? {
        Outcome::Done(record) => Ok(record),
        Outcome::OutOfTime => c.force_submit(),
    }
}

macro_rules! or_out_of_time {
    ($e:expr) => {
        match $e? {
            Outcome::Done(v) => v,
            Outcome::OutOfTime => return Ok(Outcome::OutOfTime),
        }
    };
}

impl Controller<'_> {
    fn remaining(&self) -> Option<Duration> {
        let elapsed = self.started.elapsed();
        match enforce_budget(self.cfg.budget, elapsed) {
            BudgetStatus::WithinBudget => Some(self.cfg.budget - elapsed),
            BudgetStatus::MustSubmit => None,
        }
    }

    fn emit(&self, kind: EventKind, payload: Payload) {
        self.handle.bus().tracer().emit(kind, payload, 0);
    }

    /// Next mention, or `OutOfTime`. Timeouts inside the budget keep waiting.
    fn wait(&self) -> Result<Outcome<Message>, RunError> {
        loop {
            let Some(left) = self.remaining() else { return Ok(Outcome::OutOfTime) };
            match self.handle.wait_for_mention(left.min(self.cfg.wait_slice)) {
                Ok(m) => return Ok(Outcome::Done(m)),
                Err(BusError::WaitTimeout(_)) => continue,
                Err(e) => return Err(e.into()),
            }
        }
    }

    /// Sends one mention and waits for the addressee's reply.
    fn exchange(
        &mut self,
        action: DirectiveAction,
        target: &AgentId,
        content: &str,
        subtask: Option<(usize, u32)>,
    ) -> Result<Outcome<Message>, RunError> {
        if self.remaining().is_none() {
            return Ok(Outcome::OutOfTime);
        }
        let kind = action.message_kind().unwrap_or(MessageKind::Instruction);
        self.emit(
            EventKind::Dispatch,
            Payload {
                agent: Some(self.me.to_string()),
                action: Some(action),
                target: Some(target.to_string()),
                turn: Some(self.turn),
                subtask: subtask.map(|s| s.0),
                attempt: subtask.map(|s| s.1),
                content: Some(content.to_string()),
                ..Payload::default()
            },
        );
        self.handle.send(target, content, kind, self.turn)?;
        self.turn += 1;
        loop {
            let m = or_out_of_time!(self.wait());
            if &m.sender == target {
                return Ok(Outcome::Done(m));
            }
            // a late reply to an earlier mention
            self.emit(
                EventKind::Warning,
                Payload {
                    agent: Some(self.me.to_string()),
                    sender: Some(m.sender.to_string()),
                    message_id: Some(m.id),
                    detail: Some("ignored reply from an agent that was not asked".into()),
                    ..Payload::default()
                },
            );
        }
    }

    fn plan(&mut self, request: String) -> Result<Outcome<Result<SubtaskList, String>>, RunError> {
        let planner = self.planner.clone();
        let m = or_out_of_time!(self.exchange(DirectiveAction::Inquiry, &planner, &request, None));
        Ok(Outcome::Done(parse_tasks(&m.content).map_err(|e| e.to_string())))
    }

    fn run(&mut self) -> Result<Outcome<SubmissionRecord>, RunError> {
        let intake = or_out_of_time!(self.wait());
        debug_assert!(intake.sender.is_user());

        let roster = self.handle.bus().roster();
        let mut counter = ReplanCounter::new(self.cfg.max_replans);
        let mut trajectory: Vec<String> = Vec::new();
        let mut plan = or_out_of_time!(self.plan(decompose_request(&self.query)));
        let mut attempt = 0u32;

        loop {
            let mut states: Vec<SubtaskState> = Vec::new();
            let mut failed = false;
            match &plan {
                Err(why) => {
                    trajectory.push(format!("Attempt {}: the plan could not be parsed ({why})", attempt + 1));
                    failed = true;
                }
                Ok(list) => {
                    states = pending_states(list, attempt);
                    for i in 0..states.len() {
                        let text = states[i].subtask.text.clone();
                        let role = route_subtask(&text);
                        let target = roster
                            .agent_for(role)
                            .or_else(|| roster.agent_for(Role::Web))
                            .cloned()
                            .ok_or_else(|| RunError::MissingRole(role.to_string()))?;
                        let request = subtask_request(&self.query, &states[i].subtask, list.len(), &states[..i]);
                        states[i].start().map_err(|e| RunError::Internal(e.to_string()))?;
                        let index = states[i].subtask.index;
                        let reply = or_out_of_time!(self.exchange(
                            DirectiveAction::Instruction,
                            &target,
                            &request,
                            Some((index, attempt))
                        ));
                        let (status, notes, body) = judge(&reply.content);
                        let judgement = Judgement::from_status(status);
                        states[i].finish(judgement, body).map_err(|e| RunError::Internal(e.to_string()))?;
                        self.emit(
                            EventKind::Observe,
                            Payload {
                                agent: Some(self.me.to_string()),
                                sender: Some(target.to_string()),
                                message_id: Some(reply.id),
                                subtask: Some(index),
                                attempt: Some(attempt),
                                status: Some(status),
                                notes: notes.clone(),
                                judgement: Some(judgement),
                                ..Payload::default()
                            },
                        );
                        trajectory.push(trajectory_line(attempt, &states[i], status, notes.as_deref()));
                        if judgement == Judgement::Failure {
                            failed = true;
                            break;
                        }
                    }
                }
            }

            if !failed {
                let answer = or_out_of_time!(self.assemble(&states));
                let record = SubmissionRecord::consensus(answer, self.started.elapsed(), self.planner.clone());
                return Ok(Outcome::Done(self.handle.bus().submit(record)?));
            }
            match counter.try_increment() {
                Ok(n) => {
                    self.emit(
                        EventKind::Observe,
                        Payload {
                            agent: Some(self.me.to_string()),
                            attempt: Some(n),
                            detail: Some(format!("replan {n} of {}", counter.max())),
                            ..Payload::default()
                        },
                    );
                    attempt = n;
                    plan = or_out_of_time!(self.plan(replan_request(&self.query, &trajectory.join("\n"))));
                }
                Err(exhausted) => {
                    self.emit(
                        EventKind::Observe,
                        Payload { agent: Some(self.me.to_string()), detail: Some(exhausted.to_string()), ..Payload::default() },
                    );
                    let answer = or_out_of_time!(self.assemble(&states));
                    let record = SubmissionRecord {
                        answer,
                        submitted_at: self.started.elapsed(),
                        reason: SubmitReason::ReplansExhausted,
                        confirmed_by: None,
                    };
                    return Ok(Outcome::Done(self.handle.bus().submit(record)?));
                }
            }
        }
    }

    fn assemble(&mut self, states: &[SubtaskState]) -> Result<Outcome<String>, RunError> {
        let planner = self.planner.clone();
        let request = assemble_request(&self.query, states);
        let m = or_out_of_time!(self.exchange(DirectiveAction::Inquiry, &planner, &request, None));
        let (_, _, body) = judge(&m.content);
        let line = body.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or(infoflow_core::UNRESOLVED);
        Ok(Outcome::Done(line.to_string()))
    }

    fn force_submit(&mut self) -> Result<SubmissionRecord, RunError> {
        let history = self.handle.bus().history();
        let record = SubmissionRecord::budget_exhausted(best_so_far(history.messages()), self.started.elapsed());
        Ok(self.handle.bus().submit(record)?)
    }
}

/// Self-reported status, notes and body of a worker reply.
fn judge(content: &str) -> (ReportStatus, Option<String>, String) {
    match WorkerReport::parse(content) {
        Ok(Some(r)) => (r.status, r.notes, r.body),
        _ => (infoflow_core::report::infer_status(content), None, content.trim().to_string()),
    }
}
