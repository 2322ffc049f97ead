//! State machines of the workflow-decision-tree baseline.
//!
//! The baseline decomposes a task once, routes each subtask to a worker by
//! keyword, judges each subtask by the worker's self-reported status and
//! re-decomposes the whole task when a subtask fails. A partial report is
//! judged a success: the baseline has no state for "partially done".

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Role;
use crate::planner::{Subtask, SubtaskList};
use crate::report::ReportStatus;
use crate::text::contains_word;

pub const DEFAULT_MAX_REPLANS: u32 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskStatus {
    Pending,
    Running,
    Success,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionError {
    pub from: SubtaskStatus,
    pub to: SubtaskStatus,
}

impl fmt::Display for TransitionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "illegal subtask transition {:?} -> {:?}", self.from, self.to)
    }
}

impl core::error::Error for TransitionError {}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskState {
    pub subtask: Subtask,
    pub status: SubtaskStatus,
    pub result: Option<String>,
    pub attempt: u32,
}

impl SubtaskState {
    pub fn pending(subtask: Subtask, attempt: u32) -> Self {
        Self { subtask, status: SubtaskStatus::Pending, result: None, attempt }
    }

    pub fn start(&mut self) -> Result<(), TransitionError> {
        self.transition(SubtaskStatus::Pending, SubtaskStatus::Running)
    }

    /// Records the outcome of a running subtask.
    pub fn finish(&mut self, judgement: Judgement, result: String) -> Result<(), TransitionError> {
        let to = match judgement {
            Judgement::Success => SubtaskStatus::Success,
            Judgement::Failure => SubtaskStatus::Failure,
        };
        self.transition(SubtaskStatus::Running, to)?;
        self.result = Some(result);
        Ok(())
    }

    fn transition(&mut self, from: SubtaskStatus, to: SubtaskStatus) -> Result<(), TransitionError> {
        if self.status != from {
            return Err(TransitionError { from: self.status, to });
        }
        self.status = to;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Judgement {
    Success,
    Failure,
}

impl Judgement {
    /// Self-report judgement: only an explicit failure fails.
    pub fn from_status(status: ReportStatus) -> Self {
        match status {
            ReportStatus::Complete | ReportStatus::Partial => Judgement::Success,
            ReportStatus::Failed => Judgement::Failure,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Judgement::Success => "success",
            Judgement::Failure => "failure",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplanCounter {
    attempts: u32,
    max: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplansExhausted {
    pub max: u32,
}

impl fmt::Display for ReplansExhausted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "all {} replanning attempts used", self.max)
    }
}

impl core::error::Error for ReplansExhausted {}

impl ReplanCounter {
    pub fn new(max: u32) -> Self {
        Self { attempts: 0, max }
    }

    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    pub fn max(&self) -> u32 {
        self.max
    }

    pub fn can_replan(&self) -> bool {
        self.attempts < self.max
    }

    pub fn try_increment(&mut self) -> Result<u32, ReplansExhausted> {
        if !self.can_replan() {
            return Err(ReplansExhausted { max: self.max });
        }
        self.attempts += 1;
        Ok(self.attempts)
    }
}

impl Default for ReplanCounter {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_REPLANS)
    }
}

const WEB_KEYWORDS: [&str; 2] = ["search", "web"];
const DOCUMENT_KEYWORDS: [&str; 4] = ["file", "document", "audio", "image"];
const REASONING_KEYWORDS: [&str; 3] = ["compute", "code", "excel"];

/// Keyword router: web, then document, then reasoning & coding keywords are
/// tried in that order on whole words; anything else goes to the web agent.
pub fn route_subtask(text: &str) -> Role {
    let hit = |keys: &[&str]| keys.iter().any(|k| contains_word(text, k));
    if hit(&WEB_KEYWORDS) {
        Role::Web
    } else if hit(&DOCUMENT_KEYWORDS) {
        Role::Document
    } else if hit(&REASONING_KEYWORDS) {
        Role::ReasoningCoding
    } else {
        Role::Web
    }
}

pub const DECOMPOSE_PREFIX: &str = "Decompose the following task into subtasks.";
pub const REPLAN_PREFIX: &str = "Replan the task based on the previous attempted trajectories.";
pub const ASSEMBLE_PREFIX: &str = "Provide a one-line final answer to the task.";

pub fn decompose_request(query: &str) -> String {
    format!("{DECOMPOSE_PREFIX}\nTask: {query}")
}

pub fn replan_request(query: &str, trajectory: &str) -> String {
    format!("{REPLAN_PREFIX}\nTask: {query}\nPrevious trajectories:\n{trajectory}")
}

/// The mention a routed worker receives: overall task, its subtask and every
/// earlier result, concatenated.
pub fn subtask_request(query: &str, subtask: &Subtask, total: usize, previous: &[SubtaskState]) -> String {
    let mut out = format!("Overall task: {query}\nSubtask {} of {total}: {}\nResults of previous subtasks:", subtask.index, subtask.text);
    let done: Vec<&SubtaskState> = previous.iter().filter(|s| s.result.is_some()).collect();
    if done.is_empty() {
        out.push_str("\n(none)");
    }
    for s in done {
        out.push_str(&format!("\n{}. {}", s.subtask.index, s.result.as_deref().unwrap_or("")));
    }
    out
}

pub fn assemble_request(query: &str, states: &[SubtaskState]) -> String {
    let mut out = format!("{ASSEMBLE_PREFIX}\nTask: {query}\nSubtask results:");
    for s in states {
        let r = s.result.as_deref().unwrap_or("(not executed)");
        out.push_str(&format!("\n{}. {}", s.subtask.index, r));
    }
    out
}

/// One line per executed subtask of one attempt.
pub fn trajectory_line(attempt: u32, state: &SubtaskState, status: ReportStatus, notes: Option<&str>) -> String {
    let mut line = format!(
        "Attempt {}: subtask {} \"{}\" -> {} ({})",
        attempt + 1,
        state.subtask.index,
        state.subtask.text,
        match state.status {
            SubtaskStatus::Success => "success",
            SubtaskStatus::Failure => "failure",
            SubtaskStatus::Pending => "pending",
            SubtaskStatus::Running => "running",
        },
        status
    );
    if let Some(n) = notes {
        line.push_str(": ");
        line.push_str(n);
    }
    line
}

/// Fresh pending states for a plan.
pub fn pending_states(plan: &SubtaskList, attempt: u32) -> Vec<SubtaskState> {
    plan.items().iter().cloned().map(|s| SubtaskState::pending(s, attempt)).collect()
}
