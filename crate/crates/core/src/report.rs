//! Worker output grammar.
//!
//! A worker reply is either a tool call
//!
//! ```text
//! call: search_google
//! args: survivor winners
//! ```
//!
//! or a natural-language body followed by a machine-readable trailer:
//!
//! ````text
//! Found 45 winners; birth dates for three are missing.
//!
//! ```report
//! status: partial
//! notes: birth dates missing for 3 winners
//! ```
//! ````
//!
//! The trailer may also carry `kind: answer-proposal` when the body is a
//! candidate final answer.

use alloc::format;
use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::MessageKind;

const TRAILER_OPEN: &str = "```report";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Complete,
    Partial,
    Failed,
}

impl ReportStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ReportStatus::Complete => "complete",
            ReportStatus::Partial => "partial",
            ReportStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_lowercase().as_str() {
            "complete" => Some(ReportStatus::Complete),
            "partial" => Some(ReportStatus::Partial),
            "failed" => Some(ReportStatus::Failed),
            _ => None,
        }
    }
}

impl fmt::Display for ReportStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkerReport {
    pub status: ReportStatus,
    pub body: String,
    pub notes: Option<String>,
    /// The body is a candidate final answer.
    #[serde(default)]
    pub proposal: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReportError {
    PartialWithoutNotes,
    BadTrailer(&'static str),
}

impl fmt::Display for ReportError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReportError::PartialWithoutNotes => f.write_str("a partial report must say what is missing"),
            ReportError::BadTrailer(why) => write!(f, "bad report trailer: {why}"),
        }
    }
}

impl core::error::Error for ReportError {}

impl WorkerReport {
    pub fn new(status: ReportStatus, body: impl Into<String>, notes: Option<String>) -> Result<Self, ReportError> {
        let notes = notes.filter(|n| !n.trim().is_empty());
        if status == ReportStatus::Partial && notes.is_none() {
            return Err(ReportError::PartialWithoutNotes);
        }
        Ok(Self { status, body: body.into(), notes, proposal: false })
    }

    pub fn complete(body: impl Into<String>) -> Self {
        Self { status: ReportStatus::Complete, body: body.into(), notes: None, proposal: false }
    }

    pub fn failed(body: impl Into<String>, notes: impl Into<String>) -> Self {
        Self { status: ReportStatus::Failed, body: body.into(), notes: Some(notes.into()), proposal: false }
    }

    pub fn as_proposal(mut self) -> Self {
        self.proposal = true;
        self
    }

    /// Body followed by the fenced trailer.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let body = self.body.trim();
        if !body.is_empty() {
            out.push_str(body);
            out.push_str("\n\n");
        }
        out.push_str(TRAILER_OPEN);
        out.push_str("\nstatus: ");
        out.push_str(self.status.as_str());
        if let Some(n) = &self.notes {
            out.push_str("\nnotes: ");
            out.push_str(&n.replace('\n', " "));
        }
        if self.proposal {
            out.push_str("\nkind: answer-proposal");
        }
        out.push_str("\n```");
        out
    }

    /// Parses a message carrying a trailer. `Ok(None)` when there is no
    /// trailer at all (free prose from a live model).
    pub fn parse(text: &str) -> Result<Option<Self>, ReportError> {
        let Some(at) = text.rfind(TRAILER_OPEN) else { return Ok(None) };
        let body = text[..at].trim().to_string();
        let rest = &text[at + TRAILER_OPEN.len()..];
        let block = match rest.find("```") {
            Some(end) => &rest[..end],
            None => return Err(ReportError::BadTrailer("unclosed trailer")),
        };
        let mut status = None;
        let mut notes = None;
        let mut proposal = false;
        for line in block.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, value) = line.split_once(':').ok_or(ReportError::BadTrailer("expected `key: value`"))?;
            let value = value.trim();
            match key.trim() {
                "status" => status = Some(ReportStatus::parse(value).ok_or(ReportError::BadTrailer("unknown status"))?),
                "notes" => notes = Some(value.to_string()),
                "kind" => proposal = value == MessageKind::AnswerProposal.as_str(),
                _ => return Err(ReportError::BadTrailer("unknown key")),
            }
        }
        let status = status.ok_or(ReportError::BadTrailer("missing status"))?;
        let mut report = Self::new(status, body, notes)?;
        report.proposal = proposal;
        Ok(Some(report))
    }

    /// Message kind a worker uses when sending this report.
    pub fn message_kind(&self) -> MessageKind {
        if self.proposal {
            MessageKind::AnswerProposal
        } else if self.body.contains("<tasks>") {
            MessageKind::Decomposition
        } else {
            MessageKind::Response
        }
    }
}

/// Best-effort status for replies that lack a trailer.
pub fn infer_status(text: &str) -> ReportStatus {
    let t = text.to_lowercase();
    const FAILED: [&str; 4] = ["unable to", "could not", "cannot", "failed"];
    const PARTIAL: [&str; 4] = ["missing", "partial", "not found", "proxy"];
    if FAILED.iter().any(|w| t.contains(w)) {
        ReportStatus::Failed
    } else if PARTIAL.iter().any(|w| t.contains(w)) {
        ReportStatus::Partial
    } else {
        ReportStatus::Complete
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub tool: String,
    pub args: String,
}

impl ToolCall {
    pub fn parse(text: &str) -> Option<Self> {
        let text = text.trim();
        let first = text.lines().next()?;
        let (key, tool) = first.split_once(':')?;
        if !key.trim().eq_ignore_ascii_case("call") || tool.trim().is_empty() {
            return None;
        }
        let rest = text[first.len()..].trim_start_matches(['\r', '\n']);
        let args = match rest.split_once(':') {
            Some((k, v)) if k.trim().eq_ignore_ascii_case("args") => v.trim().to_string(),
            _ => rest.trim().to_string(),
        };
        Some(Self { tool: tool.trim().to_string(), args })
    }

    pub fn render(&self) -> String {
        format!("call: {}\nargs: {}", self.tool, self.args)
    }
}
