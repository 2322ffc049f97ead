//! The planner's `<tasks>` decomposition format.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::text::contains_word;

const OPEN: &str = "<tasks>";
const CLOSE: &str = "</tasks>";
const TASK_OPEN: &str = "<task>";
const TASK_CLOSE: &str = "</task>";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub index: usize,
    pub text: String,
}

/// Flat, ordered list of subtasks indexed `1..=N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtaskList {
    items: Vec<Subtask>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TasksError {
    NoTasksBlock,
    Unclosed,
    Nested,
    Empty,
    EmptyTask(usize),
    /// Text that cannot be represented inside a `<task>` element.
    InvalidText(usize),
}

impl fmt::Display for TasksError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TasksError::NoTasksBlock => f.write_str("no <tasks> block"),
            TasksError::Unclosed => f.write_str("malformed <tasks> block: unclosed tag"),
            TasksError::Nested => f.write_str("malformed <tasks> block: nested <tasks>"),
            TasksError::Empty => f.write_str("malformed <tasks> block: empty list"),
            TasksError::EmptyTask(i) => write!(f, "malformed <tasks> block: task {i} is empty"),
            TasksError::InvalidText(i) => write!(f, "task {i} cannot be rendered"),
        }
    }
}

impl core::error::Error for TasksError {}

impl SubtaskList {
    pub fn new<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Result<Self, TasksError> {
        let items: Vec<Subtask> = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Subtask { index: i + 1, text: t.into() })
            .collect();
        if items.is_empty() {
            return Err(TasksError::Empty);
        }
        for s in &items {
            if s.text.trim().is_empty() {
                return Err(TasksError::EmptyTask(s.index));
            }
            let tagged = [OPEN, CLOSE, TASK_OPEN, TASK_CLOSE].iter().any(|t| s.text.contains(t));
            if tagged || s.text.trim() != s.text {
                return Err(TasksError::InvalidText(s.index));
            }
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[Subtask] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(|s| s.text.as_str())
    }
}

/// Parses the first `<tasks>` block. Prose around it and stray text between
/// `<task>` elements are ignored; task texts are trimmed.
pub fn parse_tasks(text: &str) -> Result<SubtaskList, TasksError> {
    let start = text.find(OPEN).ok_or(TasksError::NoTasksBlock)?;
    let after = &text[start + OPEN.len()..];
    let end = after.find(CLOSE).ok_or(TasksError::Unclosed)?;
    let inner = &after[..end];
    if inner.contains(OPEN) {
        return Err(TasksError::Nested);
    }

    let mut texts = Vec::new();
    let mut rest = inner;
    while let Some(open) = rest.find(TASK_OPEN) {
        if rest[..open].contains(TASK_CLOSE) {
            return Err(TasksError::Unclosed);
        }
        let body_and_rest = &rest[open + TASK_OPEN.len()..];
        let close = body_and_rest.find(TASK_CLOSE).ok_or(TasksError::Unclosed)?;
        let body = &body_and_rest[..close];
        if body.contains(TASK_OPEN) {
            return Err(TasksError::Unclosed);
        }
        let trimmed = body.trim();
        if trimmed.is_empty() {
            return Err(TasksError::EmptyTask(texts.len() + 1));
        }
        texts.push(trimmed.to_string());
        rest = &body_and_rest[close + TASK_CLOSE.len()..];
    }
    if rest.contains(TASK_CLOSE) {
        return Err(TasksError::Unclosed);
    }
    SubtaskList::new(texts)
}

/// Number of `<tasks>` openings in `text`; anything past the first is ignored
/// by [`parse_tasks`].
pub fn count_tasks_blocks(text: &str) -> usize {
    text.matches(OPEN).count()
}

pub fn render_tasks(list: &SubtaskList) -> String {
    let mut out = String::from(OPEN);
    for s in list.items() {
        out.push_str(TASK_OPEN);
        out.push_str(&s.text);
        out.push_str(TASK_CLOSE);
    }
    out.push_str(CLOSE);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MentionKind {
    Agent,
    Tool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub subtask: usize,
    pub term: String,
    pub kind: MentionKind,
}

/// Flags subtasks naming an agent or a tool (case-insensitive, whole word).
/// One violation per distinct term per subtask.
pub fn lint_subtasks<'a>(
    list: &SubtaskList,
    agent_names: impl IntoIterator<Item = &'a str>,
    tool_names: impl IntoIterator<Item = &'a str>,
) -> Vec<Violation> {
    let agents: Vec<&str> = agent_names.into_iter().collect();
    let tools: Vec<&str> = tool_names.into_iter().collect();
    let mut out = Vec::new();
    for s in list.items() {
        let mut seen: Vec<&str> = Vec::new();
        let terms = agents.iter().map(|a| (*a, MentionKind::Agent)).chain(tools.iter().map(|t| (*t, MentionKind::Tool)));
        for (term, kind) in terms {
            if seen.iter().any(|t| t.eq_ignore_ascii_case(term)) {
                continue;
            }
            if contains_word(&s.text, term) {
                seen.push(term);
                out.push(Violation { subtask: s.index, term: term.to_string(), kind });
            }
        }
    }
    out
}
