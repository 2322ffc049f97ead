//! Agents, messages, the session transcript and token accounting.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::time::Duration;

use serde::{Deserialize, Serialize};

use crate::directive::{SubmissionRecord, SubmitReason};

/// Reserved sender id for the external user who poses the query.
pub const USER: &str = "user";

/// Default bound on message content, in bytes.
pub const DEFAULT_MAX_CONTENT: usize = 64 * 1024;

/// Name of an agent, unique within one session.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct AgentId(String);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Result<Self, SessionError> {
        let name = name.into();
        if name.trim().is_empty() {
            return Err(SessionError::EmptyAgentId);
        }
        Ok(Self(name))
    }

    /// The reserved external sender.
    pub fn user() -> Self {
        Self(USER.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_user(&self) -> bool {
        self.0 == USER
    }
}

impl TryFrom<String> for AgentId {
    type Error = SessionError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<AgentId> for String {
    fn from(id: AgentId) -> Self {
        id.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl PartialEq<str> for AgentId {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for AgentId {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Orchestrator,
    Planner,
    Web,
    Document,
    ReasoningCoding,
    Custom,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Orchestrator,
        Role::Planner,
        Role::Web,
        Role::Document,
        Role::ReasoningCoding,
        Role::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Orchestrator => "orchestrator",
            Role::Planner => "planner",
            Role::Web => "web",
            Role::Document => "document",
            Role::ReasoningCoding => "reasoning-coding",
            Role::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Role> {
        let s = s.trim().to_lowercase().replace('_', "-");
        Role::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// The agent name the default roster uses for this role.
    pub fn default_agent_name(self) -> &'static str {
        match self {
            Role::Orchestrator => "information_flow_orchestrator",
            Role::Planner => "planner_agent",
            Role::Web => "web_agent",
            Role::Document => "document_processing_agent",
            Role::ReasoningCoding => "reasoning_coding_agent",
            Role::Custom => "custom_agent",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub name: AgentId,
    pub role: Role,
}

/// The agents of one session, exactly one of which is the orchestrator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<RosterEntry>", into = "Vec<RosterEntry>")]
pub struct AgentRoster {
    entries: Vec<RosterEntry>,
    orchestrator: usize,
}

impl AgentRoster {
    pub fn new(entries: Vec<RosterEntry>) -> Result<Self, SessionError> {
        if entries.len() < 2 {
            return Err(SessionError::InvalidRoster("a roster needs an orchestrator and at least one other agent"));
        }
        let mut seen = BTreeSet::new();
        for e in &entries {
            if e.name.is_user() {
                return Err(SessionError::InvalidRoster("the name `user` is reserved for query intake"));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(SessionError::InvalidRoster("duplicate agent id"));
            }
        }
        let mut orchestrators = entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.role == Role::Orchestrator)
            .map(|(i, _)| i);
        let orchestrator = match (orchestrators.next(), orchestrators.next()) {
            (Some(i), None) => i,
            (None, _) => return Err(SessionError::InvalidRoster("no orchestrator")),
            (Some(_), Some(_)) => return Err(SessionError::InvalidRoster("more than one orchestrator")),
        };
        Ok(Self { entries, orchestrator })
    }

    /// Builds a roster from `(name, role)` pairs.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, Role)>) -> Result<Self, SessionError> {
        let entries = pairs
            .into_iter()
            .map(|(name, role)| Ok(RosterEntry { name: AgentId::new(name)?, role }))
            .collect::<Result<Vec<_>, SessionError>>()?;
        Self::new(entries)
    }

    /// Orchestrator, planner, web, document and reasoning & coding agents.
    pub fn standard() -> Self {
        Self::from_pairs(
            [
                Role::Orchestrator,
                Role::Planner,
                Role::Web,
                Role::Document,
                Role::ReasoningCoding,
            ]
            .map(|r| (r.default_agent_name(), r)),
        )
        .expect("standard roster is valid")
    }

    pub fn orchestrator(&self) -> &AgentId {
        &self.entries[self.orchestrator].name
    }

    pub fn entries(&self) -> &[RosterEntry] {
        &self.entries
    }

    pub fn contains(&self, agent: &AgentId) -> bool {
        self.entries.iter().any(|e| &e.name == agent)
    }

    pub fn role_of(&self, agent: &AgentId) -> Option<Role> {
        self.entries.iter().find(|e| &e.name == agent).map(|e| e.role)
    }

    /// First agent holding `role`.
    pub fn agent_for(&self, role: Role) -> Option<&AgentId> {
        self.entries.iter().find(|e| e.role == role).map(|e| &e.name)
    }

    /// Resolves a name written by an orchestrator: an exact agent id, or a
    /// role name such as `web` or `reasoning-coding`.
    pub fn resolve(&self, name: &str) -> Option<&AgentId> {
        let name = name.trim();
        if let Some(e) = self.entries.iter().find(|e| e.name.as_str() == name) {
            return Some(&e.name);
        }
        if let Some(e) = self.entries.iter().find(|e| e.name.as_str().eq_ignore_ascii_case(name)) {
            return Some(&e.name);
        }
        Role::parse(name).and_then(|r| self.agent_for(r))
    }

    pub fn workers(&self) -> impl Iterator<Item = &RosterEntry> {
        let orch = self.orchestrator;
        self.entries.iter().enumerate().filter(move |(i, _)| *i != orch).map(|(_, e)| e)
    }
}

impl TryFrom<Vec<RosterEntry>> for AgentRoster {
    type Error = SessionError;

    fn try_from(entries: Vec<RosterEntry>) -> Result<Self, Self::Error> {
        Self::new(entries)
    }
}

impl From<AgentRoster> for Vec<RosterEntry> {
    fn from(r: AgentRoster) -> Self {
        r.entries
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Inquiry,
    Instruction,
    Response,
    Decomposition,
    AnswerProposal,
}

impl MessageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Inquiry => "inquiry",
            MessageKind::Instruction => "instruction",
            MessageKind::Response => "response",
            MessageKind::Decomposition => "decomposition",
            MessageKind::AnswerProposal => "answer-proposal",
        }
    }

    /// Kinds an orchestrator may send.
    pub fn is_directive(self) -> bool {
        matches!(self, MessageKind::Inquiry | MessageKind::Instruction)
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub type MessageId = u64;

/// One directed natural-language communication `(sender, recipient, content)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub id: MessageId,
    pub sender: AgentId,
    pub recipient: AgentId,
    pub content: String,
    pub kind: MessageKind,
    pub turn: u64,
    pub token_estimate: u64,
}

impl Message {
    pub fn new(
        id: MessageId,
        sender: AgentId,
        recipient: AgentId,
        content: impl Into<String>,
        kind: MessageKind,
        turn: u64,
    ) -> Result<Self, SessionError> {
        if sender == recipient {
            return Err(SessionError::SelfAddressed);
        }
        let content = content.into();
        let token_estimate = estimate_tokens(&content);
        Ok(Self { id, sender, recipient, content, kind, turn, token_estimate })
    }
}

/// Append-only transcript ordered by message id.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct History {
    messages: Vec<Message>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, msg: Message) -> Result<(), SessionError> {
        if let Some(last) = self.last_id() {
            if msg.id <= last {
                return Err(SessionError::NonMonotonicId { last, got: msg.id });
            }
        }
        self.messages.push(msg);
        Ok(())
    }

    pub fn last_id(&self) -> Option<MessageId> {
        self.messages.last().map(|m| m.id)
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Messages the agent sent or received.
    pub fn view_for<'a>(&'a self, agent: &'a AgentId) -> impl Iterator<Item = &'a Message> + 'a {
        self.messages.iter().filter(move |m| &m.sender == agent || &m.recipient == agent)
    }
}

/// One query answered by one roster under one time budget.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub query: String,
    pub roster: AgentRoster,
    pub history: History,
    pub budget: Duration,
    /// Clock reading at creation; only differences of readings are meaningful.
    pub started_at: Duration,
    submission: Option<SubmissionRecord>,
}

impl Session {
    /// Default execution-time budget: 30 minutes.
    pub const DEFAULT_BUDGET: Duration = Duration::from_secs(30 * 60);

    /// Creates a session whose history holds the query intake: a turn-0
    /// instruction from the reserved `user` sender to the orchestrator.
    pub fn new(
        id: impl Into<String>,
        query: impl Into<String>,
        roster: AgentRoster,
        budget: Duration,
        started_at: Duration,
    ) -> Result<Self, SessionError> {
        let query = query.into();
        if query.trim().is_empty() {
            return Err(SessionError::EmptyQuery);
        }
        let intake = Message::new(
            1,
            AgentId::user(),
            roster.orchestrator().clone(),
            query.clone(),
            MessageKind::Instruction,
            0,
        )?;
        let mut history = History::new();
        history.append(intake)?;
        Ok(Self { id: id.into(), query, roster, history, budget, started_at, submission: None })
    }

    pub fn submission(&self) -> Option<&SubmissionRecord> {
        self.submission.as_ref()
    }

    pub fn is_terminal(&self) -> bool {
        self.submission.is_some()
    }

    /// Stores the final submission. Write-once.
    pub fn submit(&mut self, record: SubmissionRecord) -> Result<&SubmissionRecord, SessionError> {
        if self.submission.is_some() {
            return Err(SessionError::AlreadySubmitted);
        }
        if record.reason == SubmitReason::Consensus && record.confirmed_by.is_none() {
            return Err(SessionError::InvalidRecord("a consensus submission names the confirming agent"));
        }
        Ok(self.submission.insert(record))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageSource {
    Reported,
    Estimated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub source: UsageSource,
}

impl TokenUsage {
    pub const ZERO: TokenUsage =
        TokenUsage { prompt_tokens: 0, completion_tokens: 0, source: UsageSource::Reported };

    pub fn reported(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self { prompt_tokens, completion_tokens, source: UsageSource::Reported }
    }

    /// Estimates usage from the request and response texts.
    pub fn estimate(request: &str, response: &str) -> Self {
        Self {
            prompt_tokens: estimate_tokens(request),
            completion_tokens: estimate_tokens(response),
            source: UsageSource::Estimated,
        }
    }

    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }

    /// Sum of two usages; the result is `Reported` only if both are.
    pub fn combine(self, other: TokenUsage) -> TokenUsage {
        let source = if self.source == UsageSource::Reported && other.source == UsageSource::Reported {
            UsageSource::Reported
        } else {
            UsageSource::Estimated
        };
        TokenUsage {
            prompt_tokens: self.prompt_tokens + other.prompt_tokens,
            completion_tokens: self.completion_tokens + other.completion_tokens,
            source,
        }
    }
}

impl Default for TokenUsage {
    fn default() -> Self {
        Self::ZERO
    }
}

/// Fallback token count: `ceil(chars / 4)`.
pub fn estimate_tokens(text: &str) -> u64 {
    (text.chars().count() as u64).div_ceil(4)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SessionError {
    EmptyAgentId,
    InvalidRoster(&'static str),
    EmptyQuery,
    SelfAddressed,
    NonMonotonicId { last: MessageId, got: MessageId },
    AlreadySubmitted,
    InvalidRecord(&'static str),
}

impl fmt::Display for SessionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionError::EmptyAgentId => f.write_str("agent id is empty"),
            SessionError::InvalidRoster(why) => write!(f, "invalid roster: {why}"),
            SessionError::EmptyQuery => f.write_str("query is empty"),
            SessionError::SelfAddressed => f.write_str("sender and recipient are the same agent"),
            SessionError::NonMonotonicId { last, got } => {
                write!(f, "message id {got} does not follow last id {last}")
            }
            SessionError::AlreadySubmitted => f.write_str("a final answer was already submitted"),
            SessionError::InvalidRecord(why) => write!(f, "invalid submission record: {why}"),
        }
    }
}

impl core::error::Error for SessionError {}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn id(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    fn roster3() -> AgentRoster {
        AgentRoster::from_pairs([("orch", Role::Orchestrator), ("planner", Role::Planner), ("web", Role::Web)])
            .unwrap()
    }

    fn msg(n: MessageId) -> Message {
        Message::new(n, id("orch"), id("web"), "x", MessageKind::Instruction, 0).unwrap()
    }

    #[test]
    fn new_session_holds_intake() {
        let s = Session::new("s", "Q", roster3(), Duration::from_secs(1800), Duration::ZERO).unwrap();
        assert_eq!(s.history.len(), 1);
        let intake = &s.history.messages()[0];
        assert!(intake.sender.is_user());
        assert_eq!(intake.recipient, "orch");
        assert_eq!(intake.turn, 0);
        assert_eq!(intake.kind, MessageKind::Instruction);
        assert_eq!(intake.content, "Q");
        assert!(s.submission().is_none());
    }

    #[test]
    fn roster_with_two_orchestrators_is_invalid() {
        let r = AgentRoster::from_pairs([("a", Role::Orchestrator), ("b", Role::Orchestrator), ("c", Role::Web)]);
        assert!(matches!(r, Err(SessionError::InvalidRoster(_))));
    }

    #[test]
    fn roster_rejects_duplicates_missing_orchestrator_and_singletons() {
        assert!(AgentRoster::from_pairs([("a", Role::Orchestrator), ("a", Role::Web)]).is_err());
        assert!(AgentRoster::from_pairs([("a", Role::Planner), ("b", Role::Web)]).is_err());
        assert!(AgentRoster::from_pairs([("a", Role::Orchestrator)]).is_err());
        assert!(AgentRoster::from_pairs([("a", Role::Orchestrator), ("user", Role::Web)]).is_err());
        assert_eq!(AgentId::new(""), Err(SessionError::EmptyAgentId));
    }

    #[test]
    fn empty_query_is_rejected() {
        let r = Session::new("s", "", roster3(), Duration::from_secs(1), Duration::ZERO);
        assert_eq!(r.unwrap_err(), SessionError::EmptyQuery);
    }

    #[test]
    fn history_append_semantics() {
        let mut h = History::new();
        h.append(msg(1)).unwrap();
        assert_eq!(h.len(), 1);
        for n in 2..=5 {
            h.append(msg(n)).unwrap();
        }
        let before = h.clone();
        h.append(msg(6)).unwrap();
        assert_eq!(h.len(), 6);
        assert_eq!(&h.messages()[..5], before.messages());
        assert_eq!(h.append(msg(6)), Err(SessionError::NonMonotonicId { last: 6, got: 6 }));
        let mut h5 = before;
        assert_eq!(h5.append(msg(5)), Err(SessionError::NonMonotonicId { last: 5, got: 5 }));
    }

    #[test]
    fn token_estimator() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcd"), 1);
        assert_eq!(estimate_tokens("abcde"), 2);
        // counts characters, not bytes
        assert_eq!(estimate_tokens("éééé"), 1);
    }

    #[test]
    fn submission_is_write_once() {
        let mut s = Session::new("s", "Q", roster3(), Duration::from_secs(1), Duration::ZERO).unwrap();
        let first = SubmissionRecord::consensus("42", Duration::ZERO, id("planner"));
        s.submit(first.clone()).unwrap();
        let second = SubmissionRecord::budget_exhausted("43", Duration::from_secs(1));
        assert_eq!(s.submit(second), Err(SessionError::AlreadySubmitted));
        assert_eq!(s.submission(), Some(&first));
    }

    #[test]
    fn consensus_without_confirmer_is_invalid() {
        let mut s = Session::new("s", "Q", roster3(), Duration::from_secs(1), Duration::ZERO).unwrap();
        let bad = SubmissionRecord {
            answer: "42".into(),
            submitted_at: Duration::ZERO,
            reason: SubmitReason::Consensus,
            confirmed_by: None,
        };
        assert!(matches!(s.submit(bad), Err(SessionError::InvalidRecord(_))));
        assert!(s.submission().is_none());
    }

    #[test]
    fn resolve_by_id_or_role() {
        let r = AgentRoster::standard();
        assert_eq!(r.resolve("web").unwrap(), "web_agent");
        assert_eq!(r.resolve("web_agent").unwrap(), "web_agent");
        assert_eq!(r.resolve("reasoning-coding").unwrap(), "reasoning_coding_agent");
        assert_eq!(r.resolve("reasoning_coding").unwrap(), "reasoning_coding_agent");
        assert!(r.resolve("ghost").is_none());
        assert_eq!(r.orchestrator(), "information_flow_orchestrator");
    }

    #[test]
    fn message_json_field_names() {
        let m = msg(3);
        let v = serde_json::to_value(&m).unwrap();
        let keys: vec::Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, vec!["content", "id", "kind", "recipient", "sender", "token_estimate", "turn"]);
        assert_eq!(v["kind"], "instruction");
        assert_eq!(serde_json::to_value(MessageKind::AnswerProposal).unwrap(), "answer-proposal");
    }

    #[test]
    fn self_addressed_message_is_rejected() {
        assert_eq!(
            Message::new(1, id("a"), id("a"), "x", MessageKind::Response, 0),
            Err(SessionError::SelfAddressed)
        );
    }

    proptest::proptest! {
        #[test]
        fn estimate_is_monotone(a in ".{0,64}", b in ".{0,64}") {
            let joined = alloc::format!("{a}{b}");
            proptest::prop_assert!(estimate_tokens(&a) <= estimate_tokens(&joined));
            proptest::prop_assert_eq!(estimate_tokens(&a) == 0, a.is_empty());
        }
    }
}
