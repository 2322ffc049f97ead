//! Orchestrator directives, the submission record and the time budget.
//!
//! A decision backend answers with a key-value block:
//!
//! ```text
//! action: instruction
//! target: web
//! criteria: every winner has a birth date
//! content: list all winners with their birth dates
//! ```
//!
//! `action` and `content` are required, `target` is required unless the
//! action is `submit`. `criteria` and `prune` are optional metadata, each a
//! `;`-separated list. `content` runs to the end of the block and may span
//! several lines. The block may be wrapped in a ``` fence; prose outside the
//! fence is ignored.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, MessageKind, Session};

/// Best-so-far answer when no agent ever proposed one.
pub const UNRESOLVED: &str = "UNRESOLVED";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectiveAction {
    Inquiry,
    Instruction,
    Submit,
}

impl DirectiveAction {
    pub fn as_str(self) -> &'static str {
        match self {
            DirectiveAction::Inquiry => "inquiry",
            DirectiveAction::Instruction => "instruction",
            DirectiveAction::Submit => "submit",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "inquiry" => Some(DirectiveAction::Inquiry),
            "instruction" => Some(DirectiveAction::Instruction),
            "submit" => Some(DirectiveAction::Submit),
            _ => None,
        }
    }

    /// Message kind used when the directive is dispatched.
    pub fn message_kind(self) -> Option<MessageKind> {
        match self {
            DirectiveAction::Inquiry => Some(MessageKind::Inquiry),
            DirectiveAction::Instruction => Some(MessageKind::Instruction),
            DirectiveAction::Submit => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub action: DirectiveAction,
    pub target: Option<AgentId>,
    pub content: String,
    /// Success criteria the orchestrator made explicit for this directive.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<String>,
    /// Items removed from an earlier result before relaying it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prune: Vec<String>,
}

impl Directive {
    pub fn new(
        action: DirectiveAction,
        target: Option<AgentId>,
        content: impl Into<String>,
    ) -> Result<Self, DirectiveError> {
        let d = Directive { action, target, content: content.into(), criteria: Vec::new(), prune: Vec::new() };
        d.validate()?;
        Ok(d)
    }

    pub fn instruction(target: AgentId, content: impl Into<String>) -> Result<Self, DirectiveError> {
        Self::new(DirectiveAction::Instruction, Some(target), content)
    }

    pub fn inquiry(target: AgentId, content: impl Into<String>) -> Result<Self, DirectiveError> {
        Self::new(DirectiveAction::Inquiry, Some(target), content)
    }

    pub fn submit(answer: impl Into<String>) -> Result<Self, DirectiveError> {
        Self::new(DirectiveAction::Submit, None, answer)
    }

    pub fn validate(&self) -> Result<(), DirectiveError> {
        match (self.action, &self.target) {
            (DirectiveAction::Submit, Some(_)) => return Err(DirectiveError::Malformed("submit takes no target")),
            (DirectiveAction::Inquiry | DirectiveAction::Instruction, None) => {
                return Err(DirectiveError::Malformed("inquiry and instruction need a target"))
            }
            _ => {}
        }
        if self.content.trim().is_empty() {
            return Err(DirectiveError::Malformed("content is empty"));
        }
        if self.criteria.iter().chain(&self.prune).any(|s| s.trim().is_empty() || s.contains(['\n', ';'])) {
            return Err(DirectiveError::Malformed("metadata items must be single-line and non-empty"));
        }
        Ok(())
    }

    /// Canonical fenced rendering; `parse_directive` inverts it.
    pub fn render(&self) -> String {
        let mut out = String::from("```directive\naction: ");
        out.push_str(self.action.as_str());
        out.push('\n');
        if let Some(t) = &self.target {
            out.push_str("target: ");
            out.push_str(t.as_str());
            out.push('\n');
        }
        if !self.criteria.is_empty() {
            out.push_str("criteria: ");
            out.push_str(&self.criteria.join("; "));
            out.push('\n');
        }
        if !self.prune.is_empty() {
            out.push_str("prune: ");
            out.push_str(&self.prune.join("; "));
            out.push('\n');
        }
        out.push_str("content: ");
        out.push_str(&self.content);
        out.push_str("\n```");
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DirectiveError {
    Malformed(&'static str),
}

impl fmt::Display for DirectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirectiveError::Malformed(why) => write!(f, "malformed decision: {why}"),
        }
    }
}

impl core::error::Error for DirectiveError {}

/// Interior of the first ``` fence, or the whole text if there is none.
pub(crate) fn fenced_block(text: &str) -> &str {
    let Some(open) = text.find("```") else { return text };
    let after = &text[open + 3..];
    let body_start = after.find('\n').map(|i| i + 1).unwrap_or(after.len());
    let body = &after[body_start..];
    match body.find("```") {
        Some(close) => &body[..close],
        None => body,
    }
}

fn split_list(value: &str) -> Vec<String> {
    value.split(';').map(str::trim).filter(|s| !s.is_empty()).map(ToString::to_string).collect()
}

pub fn parse_directive(text: &str) -> Result<Directive, DirectiveError> {
    let block = fenced_block(text);
    let mut lines = block.lines().skip_while(|l| !l.trim_start().to_lowercase().starts_with("action:"));

    let mut action = None;
    let mut target = None;
    let mut criteria = Vec::new();
    let mut prune = Vec::new();
    let mut content: Option<String> = None;

    while let Some(line) = lines.next() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let Some((key, value)) = trimmed.split_once(':') else {
            return Err(DirectiveError::Malformed("expected `key: value`"));
        };
        let value = value.trim();
        match key.trim().to_lowercase().as_str() {
            "action" => {
                action = Some(DirectiveAction::parse(value).ok_or(DirectiveError::Malformed("unknown action"))?)
            }
            "target" if !value.is_empty() => {
                target = Some(AgentId::new(value).map_err(|_| DirectiveError::Malformed("bad target"))?)
            }
            "target" => {}
            "criteria" => criteria.extend(split_list(value)),
            "prune" => prune.extend(split_list(value)),
            "content" => {
                // the rest of the block belongs to content
                let mut c = String::from(value);
                for rest in lines.by_ref() {
                    c.push('\n');
                    c.push_str(rest);
                }
                content = Some(c.trim().to_string());
                break;
            }
            _ => return Err(DirectiveError::Malformed("unknown key")),
        }
    }

    let action = action.ok_or(DirectiveError::Malformed("missing action"))?;
    let content = content.ok_or(DirectiveError::Malformed("missing content"))?;
    let d = Directive { action, target, content, criteria, prune };
    d.validate()?;
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubmitReason {
    Consensus,
    BudgetExhausted,
    /// Workflow baseline only: the replanning cap was reached.
    ReplansExhausted,
}

impl SubmitReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SubmitReason::Consensus => "consensus",
            SubmitReason::BudgetExhausted => "budget_exhausted",
            SubmitReason::ReplansExhausted => "replans_exhausted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SubmitReason::Consensus, SubmitReason::BudgetExhausted, SubmitReason::ReplansExhausted]
            .into_iter()
            .find(|r| r.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionRecord {
    pub answer: String,
    pub submitted_at: Duration,
    pub reason: SubmitReason,
    pub confirmed_by: Option<AgentId>,
}

impl SubmissionRecord {
    pub fn consensus(answer: impl Into<String>, at: Duration, confirmed_by: AgentId) -> Self {
        Self { answer: answer.into(), submitted_at: at, reason: SubmitReason::Consensus, confirmed_by: Some(confirmed_by) }
    }

    pub fn budget_exhausted(answer: impl Into<String>, at: Duration) -> Self {
        Self { answer: answer.into(), submitted_at: at, reason: SubmitReason::BudgetExhausted, confirmed_by: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BudgetStatus {
    WithinBudget,
    MustSubmit,
}

/// `MustSubmit` iff `elapsed >= budget`.
pub fn enforce_budget(budget: Duration, elapsed: Duration) -> BudgetStatus {
    if elapsed >= budget {
        BudgetStatus::MustSubmit
    } else {
        BudgetStatus::WithinBudget
    }
}

impl Session {
    /// Budget status at clock reading `now` (same clock as `started_at`).
    pub fn budget_status(&self, now: Duration) -> BudgetStatus {
        enforce_budget(self.budget, now.saturating_sub(self.started_at))
    }
}

/// Role prompt handed to a decision backend as the first context segment.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptProfile {
    pub role_name: String,
    pub prompt_text: String,
}

impl PromptProfile {
    pub fn new(role_name: impl Into<String>, prompt_text: impl Into<String>) -> Option<Self> {
        let prompt_text = prompt_text.into();
        if prompt_text.trim().is_empty() {
            return None;
        }
        Some(Self { role_name: role_name.into(), prompt_text })
    }
}
