//! In-process mention bus: per-agent FIFO mailboxes, blocking waits and the
//! star-topology guard.
//!
//! All state sits behind one mutex, and each mailbox has its own condition
//! variable. Trace events for sends, rejected sends and deliveries are
//! emitted while the lock is held, so the trace order equals the order in
//! which the bus accepted and handed out messages.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use infoflow_core::directive::SubmitReason;
use infoflow_core::model::{History, MessageId, DEFAULT_MAX_CONTENT};
use infoflow_core::trace::{EventKind, Payload};
use infoflow_core::{
    validate_edge, AgentId, AgentRoster, Message, MessageKind, Session, SessionError, SubmissionRecord,
    TopologyPolicy,
};

use crate::trace::Tracer;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("bus is closed")]
    Closed,
    #[error("agent {0} is not in the roster")]
    UnknownAgent(String),
    #[error("agent {0} is already registered")]
    DuplicateRegistration(String),
    #[error("sender {0} is not registered")]
    UnknownSender(String),
    #[error("recipient {0} is not registered")]
    UnknownRecipient(String),
    #[error("an agent cannot message itself")]
    SelfAddressed,
    #[error("topology forbids {sender} -> {recipient}")]
    TopologyViolation { sender: String, recipient: String },
    #[error("{sender} may not send {kind} messages")]
    KindNotPermitted { sender: String, kind: MessageKind },
    #[error("content of {size} bytes exceeds the {max}-byte limit")]
    ContentTooLarge { size: usize, max: usize },
    #[error("no mention within {0:?}")]
    WaitTimeout(Duration),
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl BusError {
    pub fn label(&self) -> &'static str {
        match self {
            BusError::Closed => "bus_closed",
            BusError::UnknownAgent(_) => "unknown_agent",
            BusError::DuplicateRegistration(_) => "duplicate_registration",
            BusError::UnknownSender(_) => "unknown_sender",
            BusError::UnknownRecipient(_) => "unknown_recipient",
            BusError::SelfAddressed => "self_addressed",
            BusError::TopologyViolation { .. } => "topology_violation",
            BusError::KindNotPermitted { .. } => "kind_not_permitted",
            BusError::ContentTooLarge { .. } => "content_too_large",
            BusError::WaitTimeout(_) => "wait_timeout",
            BusError::Session(_) => "session",
        }
    }
}

struct State {
    session: Session,
    registered: BTreeSet<AgentId>,
    mailboxes: BTreeMap<AgentId, VecDeque<Message>>,
    next_id: MessageId,
    closed: bool,
}

struct Shared {
    state: Mutex<State>,
    signals: BTreeMap<AgentId, Condvar>,
    closed_signal: Condvar,
    policy: TopologyPolicy,
    max_content: usize,
    tracer: Tracer,
}

/// Cheaply cloneable reference to one session's bus.
#[derive(Clone)]
pub struct Bus {
    shared: Arc<Shared>,
}

/// Registration of one agent; the only way to wait on its mailbox.
pub struct Handle {
    bus: Bus,
    agent: AgentId,
}

impl Bus {
    /// Takes ownership of the session. Messages already in its history (the
    /// query intake) are queued for the orchestrator.
    pub fn new(session: Session, policy: TopologyPolicy, tracer: Tracer) -> Self {
        Self::with_max_content(session, policy, tracer, DEFAULT_MAX_CONTENT)
    }

    pub fn with_max_content(session: Session, policy: TopologyPolicy, tracer: Tracer, max_content: usize) -> Self {
        let signals = session.roster.entries().iter().map(|e| (e.name.clone(), Condvar::new())).collect();
        let mut mailboxes: BTreeMap<AgentId, VecDeque<Message>> = BTreeMap::new();
        for m in session.history.messages() {
            tracer.emit(
                EventKind::Send,
                Payload {
                    sender: Some(m.sender.to_string()),
                    recipient: Some(m.recipient.to_string()),
                    message_id: Some(m.id),
                    msg_kind: Some(m.kind),
                    turn: Some(m.turn),
                    content: Some(m.content.clone()),
                    ..Payload::default()
                },
                0,
            );
            mailboxes.entry(m.recipient.clone()).or_default().push_back(m.clone());
        }
        let next_id = session.history.last_id().unwrap_or(0) + 1;
        let state = State { session, registered: BTreeSet::new(), mailboxes, next_id, closed: false };
        Self {
            shared: Arc::new(Shared {
                state: Mutex::new(state),
                signals,
                closed_signal: Condvar::new(),
                policy,
                max_content,
                tracer,
            }),
        }
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.shared.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn tracer(&self) -> &Tracer {
        &self.shared.tracer
    }

    pub fn policy(&self) -> &TopologyPolicy {
        &self.shared.policy
    }

    pub fn register(&self, agent: &AgentId) -> Result<Handle, BusError> {
        let mut st = self.lock();
        if !st.session.roster.contains(agent) {
            return Err(BusError::UnknownAgent(agent.to_string()));
        }
        if !st.registered.insert(agent.clone()) {
            return Err(BusError::DuplicateRegistration(agent.to_string()));
        }
        st.mailboxes.entry(agent.clone()).or_default();
        Ok(Handle { bus: self.clone(), agent: agent.clone() })
    }

    /// Validates and enqueues one message. A rejected send consumes no id
    /// and leaves history untouched.
    pub fn send(
        &self,
        sender: &AgentId,
        recipient: &AgentId,
        content: &str,
        kind: MessageKind,
        turn: u64,
    ) -> Result<MessageId, BusError> {
        let mut st = self.lock();
        let result = self.check_send(&st, sender, recipient, content, kind);
        let tracer = &self.shared.tracer;
        if let Err(err) = result {
            tracer.emit(
                EventKind::SendRejected,
                Payload {
                    sender: Some(sender.to_string()),
                    recipient: Some(recipient.to_string()),
                    msg_kind: Some(kind),
                    turn: Some(turn),
                    error: Some(err.label().to_string()),
                    detail: Some(err.to_string()),
                    ..Payload::default()
                },
                0,
            );
            return Err(err);
        }
        let id = st.next_id;
        let msg = Message::new(id, sender.clone(), recipient.clone(), content, kind, turn)?;
        st.session.history.append(msg.clone())?;
        st.next_id += 1;
        tracer.emit(
            EventKind::Send,
            Payload {
                sender: Some(sender.to_string()),
                recipient: Some(recipient.to_string()),
                message_id: Some(id),
                msg_kind: Some(kind),
                turn: Some(turn),
                content: Some(content.to_string()),
                ..Payload::default()
            },
            0,
        );
        st.mailboxes.entry(recipient.clone()).or_default().push_back(msg);
        if let Some(cv) = self.shared.signals.get(recipient) {
            cv.notify_one();
        }
        Ok(id)
    }

    fn check_send(
        &self,
        st: &State,
        sender: &AgentId,
        recipient: &AgentId,
        content: &str,
        kind: MessageKind,
    ) -> Result<(), BusError> {
        if st.closed {
            return Err(BusError::Closed);
        }
        if !st.registered.contains(sender) {
            return Err(BusError::UnknownSender(sender.to_string()));
        }
        if !st.registered.contains(recipient) {
            return Err(BusError::UnknownRecipient(recipient.to_string()));
        }
        if sender == recipient {
            return Err(BusError::SelfAddressed);
        }
        if !validate_edge(&self.shared.policy, sender, recipient) {
            return Err(BusError::TopologyViolation { sender: sender.to_string(), recipient: recipient.to_string() });
        }
        if kind.is_directive() && sender != st.session.roster.orchestrator() {
            return Err(BusError::KindNotPermitted { sender: sender.to_string(), kind });
        }
        if content.len() > self.shared.max_content {
            return Err(BusError::ContentTooLarge { size: content.len(), max: self.shared.max_content });
        }
        Ok(())
    }

    fn wait(&self, agent: &AgentId, timeout: Duration) -> Result<Message, BusError> {
        let cv = self.shared.signals.get(agent).ok_or_else(|| BusError::UnknownAgent(agent.to_string()))?;
        let deadline = Instant::now() + timeout;
        let mut st = self.lock();
        loop {
            if st.closed {
                return Err(BusError::Closed);
            }
            if let Some(msg) = st.mailboxes.get_mut(agent).and_then(VecDeque::pop_front) {
                self.shared.tracer.emit(
                    EventKind::Deliver,
                    Payload {
                        agent: Some(agent.to_string()),
                        sender: Some(msg.sender.to_string()),
                        message_id: Some(msg.id),
                        ..Payload::default()
                    },
                    0,
                );
                return Ok(msg);
            }
            let now = Instant::now();
            if now >= deadline {
                return Err(BusError::WaitTimeout(timeout));
            }
            st = cv.wait_timeout(st, deadline - now).unwrap_or_else(|p| p.into_inner()).0;
        }
    }

    /// Stores the write-once submission, emits the terminal trace event and
    /// closes the bus.
    pub fn submit(&self, record: SubmissionRecord) -> Result<SubmissionRecord, BusError> {
        let mut st = self.lock();
        let stored = st.session.submit(record)?.clone();
        let kind = match stored.reason {
            SubmitReason::BudgetExhausted => EventKind::BudgetForced,
            SubmitReason::Consensus | SubmitReason::ReplansExhausted => EventKind::Submit,
        };
        self.shared.tracer.emit(
            kind,
            Payload {
                agent: Some(st.session.roster.orchestrator().to_string()),
                answer: Some(stored.answer.clone()),
                reason: Some(stored.reason),
                confirmed_by: stored.confirmed_by.as_ref().map(ToString::to_string),
                ..Payload::default()
            },
            0,
        );
        self.close_locked(&mut st);
        Ok(stored)
    }

    pub fn close(&self) {
        let mut st = self.lock();
        self.close_locked(&mut st);
    }

    fn close_locked(&self, st: &mut State) {
        st.closed = true;
        for cv in self.shared.signals.values() {
            cv.notify_all();
        }
        self.shared.closed_signal.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.lock().closed
    }

    /// Blocks until the bus closes or `timeout` elapses; true if closed.
    pub fn wait_closed(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut st = self.lock();
        while !st.closed {
            let now = Instant::now();
            if now >= deadline {
                return false;
            }
            st = self.shared.closed_signal.wait_timeout(st, deadline - now).unwrap_or_else(|p| p.into_inner()).0;
        }
        true
    }

    pub fn roster(&self) -> AgentRoster {
        self.lock().session.roster.clone()
    }

    pub fn query(&self) -> String {
        self.lock().session.query.clone()
    }

    pub fn history(&self) -> History {
        self.lock().session.history.clone()
    }

    /// Messages the agent sent or received, in id order.
    pub fn view_for(&self, agent: &AgentId) -> Vec<Message> {
        self.lock().session.history.view_for(agent).cloned().collect()
    }

    pub fn session(&self) -> Session {
        self.lock().session.clone()
    }

    pub fn submission(&self) -> Option<SubmissionRecord> {
        self.lock().session.submission().cloned()
    }

    /// Number of queued, undelivered messages for `agent`.
    pub fn pending(&self, agent: &AgentId) -> usize {
        self.lock().mailboxes.get(agent).map_or(0, VecDeque::len)
    }
}

impl Handle {
    pub fn agent(&self) -> &AgentId {
        &self.agent
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    /// Oldest queued mention, blocking up to `timeout`.
    pub fn wait_for_mention(&self, timeout: Duration) -> Result<Message, BusError> {
        self.bus.wait(&self.agent, timeout)
    }

    pub fn send(&self, recipient: &AgentId, content: &str, kind: MessageKind, turn: u64) -> Result<MessageId, BusError> {
        self.bus.send(&self.agent, recipient, content, kind, turn)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use infoflow_core::trace::Mode;
    use infoflow_core::{Role, TopologyMode};

    fn id(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    fn bus(mode: TopologyMode) -> Bus {
        let roster =
            AgentRoster::from_pairs([("orch", Role::Orchestrator), ("web", Role::Web), ("doc", Role::Document)]).unwrap();
        let session = Session::new("s", "Q", roster, Duration::from_secs(60), Duration::ZERO).unwrap();
        Bus::new(session, TopologyPolicy { orchestrator: id("orch"), mode }, Tracer::new("s", Mode::A2a))
    }

    #[test]
    fn registration_errors() {
        let b = bus(TopologyMode::Star);
        b.register(&id("web")).unwrap();
        assert_eq!(b.register(&id("web")).err(), Some(BusError::DuplicateRegistration("web".into())));
        assert_eq!(b.register(&id("ghost")).err(), Some(BusError::UnknownAgent("ghost".into())));
    }

    #[test]
    fn star_edges() {
        let b = bus(TopologyMode::Star);
        let o = b.register(&id("orch")).unwrap();
        let w = b.register(&id("web")).unwrap();
        b.register(&id("doc")).unwrap();
        assert_eq!(o.send(&id("web"), "fetch winners", MessageKind::Instruction, 0), Ok(2));
        assert!(matches!(
            w.send(&id("doc"), "hi", MessageKind::Response, 0),
            Err(BusError::TopologyViolation { .. })
        ));
        assert_eq!(w.send(&id("orch"), "done", MessageKind::Response, 0), Ok(3));
        assert!(matches!(
            w.send(&id("orch"), "do it", MessageKind::Instruction, 0),
            Err(BusError::KindNotPermitted { .. })
        ));
        // rejected sends leave no gaps in ids
        assert_eq!(b.history().messages().iter().map(|m| m.id).collect::<Vec<_>>(), [1, 2, 3]);
        let kinds: Vec<EventKind> = b.tracer().events().iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            [EventKind::Send, EventKind::Send, EventKind::SendRejected, EventKind::Send, EventKind::SendRejected]
        );
    }

    #[test]
    fn unrestricted_allows_worker_edges() {
        let b = bus(TopologyMode::Unrestricted);
        let w = b.register(&id("web")).unwrap();
        b.register(&id("doc")).unwrap();
        assert!(w.send(&id("doc"), "hi", MessageKind::Response, 0).is_ok());
    }

    #[test]
    fn fifo_timeout_and_close() {
        let b = bus(TopologyMode::Star);
        let o = b.register(&id("orch")).unwrap();
        let w = b.register(&id("web")).unwrap();
        assert_eq!(o.wait_for_mention(Duration::from_millis(10)).unwrap().id, 1);
        o.send(&id("web"), "m1", MessageKind::Instruction, 0).unwrap();
        o.send(&id("web"), "m2", MessageKind::Instruction, 1).unwrap();
        assert_eq!(w.wait_for_mention(Duration::from_millis(10)).unwrap().content, "m1");
        assert_eq!(w.wait_for_mention(Duration::from_millis(10)).unwrap().content, "m2");
        let start = Instant::now();
        assert_eq!(w.wait_for_mention(Duration::from_millis(50)), Err(BusError::WaitTimeout(Duration::from_millis(50))));
        assert!(start.elapsed() >= Duration::from_millis(50));
        b.close();
        assert_eq!(w.wait_for_mention(Duration::from_secs(5)), Err(BusError::Closed));
        assert_eq!(o.send(&id("web"), "late", MessageKind::Instruction, 2), Err(BusError::Closed));
    }

    #[test]
    fn oversize_content_is_rejected() {
        let roster = AgentRoster::from_pairs([("orch", Role::Orchestrator), ("web", Role::Web)]).unwrap();
        let session = Session::new("s", "Q", roster, Duration::from_secs(60), Duration::ZERO).unwrap();
        let b = Bus::with_max_content(session, TopologyPolicy::star(id("orch")), Tracer::new("s", Mode::A2a), 4);
        let o = b.register(&id("orch")).unwrap();
        b.register(&id("web")).unwrap();
        assert_eq!(
            o.send(&id("web"), "12345", MessageKind::Instruction, 0),
            Err(BusError::ContentTooLarge { size: 5, max: 4 })
        );
    }

    #[test]
    fn submit_closes_and_is_write_once() {
        let b = bus(TopologyMode::Star);
        let w = b.register(&id("web")).unwrap();
        let rec = SubmissionRecord::budget_exhausted("UNRESOLVED", Duration::ZERO);
        b.submit(rec.clone()).unwrap();
        assert!(b.is_closed());
        assert!(b.wait_closed(Duration::ZERO));
        assert_eq!(w.wait_for_mention(Duration::from_millis(1)), Err(BusError::Closed));
        assert_eq!(b.submit(rec.clone()), Err(BusError::Session(SessionError::AlreadySubmitted)));
        assert_eq!(b.submission(), Some(rec));
    }
}
