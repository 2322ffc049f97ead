//! Context segments and scripted decision policies.
//!
//! A scripted policy is an ordered rule table. The backend looks at the last
//! context segment (the newest observation), takes the first rule whose
//! pattern matches it, and returns that rule's reply. `{observation}` in a
//! reply is replaced by the body of the observation, so an echo policy is a
//! single catch-all rule replying `{observation}`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{AgentId, Message};
use crate::toolkit::ToolResult;

pub const OBSERVATION_PLACEHOLDER: &str = "{observation}";

/// Default number of history segments passed to a backend.
pub const DEFAULT_SEGMENT_BUDGET: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentRole {
    System,
    User,
    Assistant,
}

impl SegmentRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentRole::System => "system",
            SegmentRole::User => "user",
            SegmentRole::Assistant => "assistant",
        }
    }
}

/// One role-tagged piece of backend context.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub role: SegmentRole,
    pub text: String,
}

impl Segment {
    pub fn system(text: impl Into<String>) -> Self {
        Self { role: SegmentRole::System, text: text.into() }
    }

    pub fn user(text: impl Into<String>) -> Self {
        Self { role: SegmentRole::User, text: text.into() }
    }

    /// A transcript message as seen by `viewer`: the viewer's own messages
    /// are assistant turns, everything else is user input.
    pub fn from_message(msg: &Message, viewer: &AgentId) -> Self {
        let role = if &msg.sender == viewer { SegmentRole::Assistant } else { SegmentRole::User };
        Self { role, text: format!("[{} -> {}] {}\n{}", msg.sender, msg.recipient, msg.kind, msg.content) }
    }

    pub fn note(text: impl AsRef<str>) -> Self {
        Self::user(format!("[note] {}", text.as_ref()))
    }

    pub fn tool_result(result: &ToolResult) -> Self {
        let status = if result.ok { "ok" } else { "error" };
        Self::user(format!("[tool_result {} {}]\n{}", result.tool, status, result.output))
    }

    /// Text after the bracketed header line, or the whole text if there is
    /// no header.
    pub fn body(&self) -> &str {
        body_of(&self.text)
    }
}

fn body_of(text: &str) -> &str {
    if text.starts_with('[') {
        match text.split_once('\n') {
            Some((_, body)) => body,
            None => text.split_once("] ").map(|(_, b)| b).unwrap_or(text),
        }
    } else {
        text
    }
}

/// Role prompt first, then an optional format note, then the newest
/// `budget` segments of the view (older segments are dropped first).
pub fn assemble_context(prompt: &str, format_note: Option<&str>, view: &[Segment], budget: usize) -> Vec<Segment> {
    let mut ctx = Vec::with_capacity(view.len().min(budget) + 2);
    ctx.push(Segment::system(prompt));
    if let Some(note) = format_note {
        ctx.push(Segment::system(note));
    }
    let skip = view.len().saturating_sub(budget);
    ctx.extend(view[skip..].iter().cloned());
    ctx
}

/// Joined request text, used for token estimation.
pub fn request_text(context: &[Segment]) -> String {
    let mut out = String::new();
    for (i, s) in context.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&s.text);
    }
    out
}

/// Substring conditions on an observation. An empty pattern matches
/// everything.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pattern {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub all: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub none: Vec<String>,
}

impl Pattern {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn contains(needle: impl Into<String>) -> Self {
        Self { all: alloc::vec![needle.into()], none: Vec::new() }
    }

    pub fn and(mut self, needle: impl Into<String>) -> Self {
        self.all.push(needle.into());
        self
    }

    pub fn but_not(mut self, needle: impl Into<String>) -> Self {
        self.none.push(needle.into());
        self
    }

    pub fn matches(&self, text: &str) -> bool {
        self.all.iter().all(|n| text.contains(n.as_str())) && !self.none.iter().any(|n| text.contains(n.as_str()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub when: Pattern,
    pub reply: String,
}

impl Rule {
    pub fn new(when: Pattern, reply: impl Into<String>) -> Self {
        Self { when, reply: reply.into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub rules: Vec<Rule>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptGap {
    pub observation: String,
}

impl fmt::Display for ScriptGap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut shown: String = self.observation.chars().take(160).collect();
        if shown.len() < self.observation.len() {
            shown.push_str("...");
        }
        write!(f, "scripted policy has no rule for observation {shown:?}")
    }
}

impl core::error::Error for ScriptGap {}

impl Script {
    pub fn new(rules: Vec<Rule>) -> Self {
        Self { rules }
    }

    /// Replies with the observation body to anything.
    pub fn echo() -> Self {
        Self::new(alloc::vec![Rule::new(Pattern::any(), OBSERVATION_PLACEHOLDER)])
    }

    pub fn lookup(&self, observation: &str) -> Result<String, ScriptGap> {
        self.rules
            .iter()
            .find(|r| r.when.matches(observation))
            .map(|r| r.reply.replace(OBSERVATION_PLACEHOLDER, body_of(observation)))
            .ok_or_else(|| ScriptGap { observation: observation.to_string() })
    }

    /// Looks up the last segment of a context.
    pub fn respond(&self, context: &[Segment]) -> Result<String, ScriptGap> {
        let last = context.last().map(|s| s.text.as_str()).unwrap_or("");
        self.lookup(last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MessageKind;

    #[test]
    fn echo_policy() {
        let s = Script::echo();
        assert_eq!(s.respond(&[Segment::system("p"), Segment::user("ping")]).unwrap(), "ping");
    }

    #[test]
    fn unmatched_is_a_gap() {
        let s = Script::new(alloc::vec![Rule::new(Pattern::contains("winners"), "call: search_google\nargs: x")]);
        assert!(s.lookup("hello").is_err());
        assert_eq!(s.lookup("list winners").unwrap(), "call: search_google\nargs: x");
    }

    #[test]
    fn first_match_wins_and_negations_apply() {
        let s = Script::new(alloc::vec![
            Rule::new(Pattern::contains("Subtask").but_not("revised"), "first"),
            Rule::new(Pattern::contains("Subtask"), "second"),
        ]);
        assert_eq!(s.lookup("Subtask 1").unwrap(), "first");
        assert_eq!(s.lookup("Subtask 1 (revised)").unwrap(), "second");
    }

    #[test]
    fn placeholder_takes_the_body() {
        let m = Message::new(
            2,
            AgentId::new("o").unwrap(),
            AgentId::new("w").unwrap(),
            "compute 2+2",
            MessageKind::Instruction,
            0,
        )
        .unwrap();
        let seg = Segment::from_message(&m, &AgentId::new("w").unwrap());
        assert_eq!(seg.text, "[o -> w] instruction\ncompute 2+2");
        assert_eq!(seg.role, SegmentRole::User);
        assert_eq!(Script::echo().lookup(&seg.text).unwrap(), "compute 2+2");
        let tr = Segment::tool_result(&ToolResult::ok("execute_code", "4"));
        assert_eq!(tr.body(), "4");
        assert_eq!(Segment::note("timeout").body(), "timeout");
    }

    #[test]
    fn context_truncates_oldest_first() {
        let view: Vec<Segment> = (0..10).map(|i| Segment::user(format!("m{i}"))).collect();
        let ctx = assemble_context("prompt", Some("fmt"), &view, 3);
        let texts: Vec<&str> = ctx.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["prompt", "fmt", "m7", "m8", "m9"]);
        assert_eq!(request_text(&ctx[..2]), "prompt\nfmt");
    }
}
