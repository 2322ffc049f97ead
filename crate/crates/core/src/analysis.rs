//! Trace analysis: coordination patterns, edge-case handling strategies,
//! token accounting and token-consumption CDFs.
//!
//! Classification works on *exchanges*: an orchestrator directive that was
//! accepted by the bus, paired with the response of the agent it addressed.
//! Response status comes from the worker's report trailer; a reply without a
//! trailer gets a keyword-inferred status and every instance built on it is
//! flagged `low_confidence`.
//!
//! Patterns:
//! - `direct_dispatch`: the first worker exchange happens before any planner
//!   decomposition.
//! - `planner_mediated`: the planner answers with a `<tasks>` list and a worker
//!   is dispatched afterwards.
//! - `instruction_refinement`: a worker reports partial or failed and the very
//!   next directive is a different instruction to the same worker.
//! - `agent_substitution`: a worker reports failed and the very next directive
//!   is an instruction to a different, non-planner worker.
//!
//! Strategies:
//! - `criteria_tightening`: a partial report is answered by an instruction to
//!   the same worker that carries explicit `criteria`.
//! - `semantic_audit`: the next directive carries `prune` items that appear in
//!   the previous result and are absent from the relayed content.
//! - `alignment_escalation`: a worker notes a proxy or mismatch and the next
//!   directive goes to the planner.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::directive::DirectiveAction;
use crate::model::{Role, TokenUsage, UsageSource, USER};
use crate::planner::parse_tasks;
use crate::report::{infer_status, ReportStatus, WorkerReport};
use crate::text::contains_ci;
use crate::trace::{is_terminal, roster_of, EventKind, Mode, TraceEvent};

/// Version of the pattern and strategy formalization implemented here.
pub const CLASSIFIER_VERSION: u32 = 1;

const ESCALATION_CUES: [&str; 2] = ["proxy", "mismatch"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    DirectDispatch,
    PlannerMediated,
    InstructionRefinement,
    AgentSubstitution,
}

impl Pattern {
    pub const ALL: [Pattern; 4] =
        [Pattern::DirectDispatch, Pattern::PlannerMediated, Pattern::InstructionRefinement, Pattern::AgentSubstitution];

    pub fn as_str(self) -> &'static str {
        match self {
            Pattern::DirectDispatch => "direct_dispatch",
            Pattern::PlannerMediated => "planner_mediated",
            Pattern::InstructionRefinement => "instruction_refinement",
            Pattern::AgentSubstitution => "agent_substitution",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    CriteriaTightening,
    SemanticAudit,
    AlignmentEscalation,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::CriteriaTightening, Strategy::SemanticAudit, Strategy::AlignmentEscalation];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::CriteriaTightening => "criteria_tightening",
            Strategy::SemanticAudit => "semantic_audit",
            Strategy::AlignmentEscalation => "alignment_escalation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternInstance {
    pub pattern: Pattern,
    pub evidence: Vec<u64>,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyInstance {
    pub strategy: Strategy,
    pub evidence: Vec<u64>,
    /// Pruned items, for `semantic_audit`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<String>,
    pub low_confidence: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AnalysisError {
    IncompleteTrace,
    NotA2a,
    EmptyInput,
}

impl fmt::Display for AnalysisError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisError::IncompleteTrace => f.write_str("trace has no submit or budget_forced event"),
            AnalysisError::NotA2a => f.write_str("pattern analysis needs an a2a-mode trace"),
            AnalysisError::EmptyInput => f.write_str("no traces given"),
        }
    }
}

impl core::error::Error for AnalysisError {}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Response {
    seq: u64,
    status: ReportStatus,
    notes: Option<String>,
    body: String,
    has_tasks: bool,
    inferred: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Exchange {
    dispatch_seq: u64,
    target: String,
    action: DirectiveAction,
    content: String,
    criteria: Vec<String>,
    prune: Vec<String>,
    response: Option<Response>,
}

struct Exchanges {
    items: Vec<Exchange>,
    planners: BTreeSet<String>,
}

impl Exchanges {
    fn is_planner(&self, agent: &str) -> bool {
        self.planners.contains(agent)
    }

    fn is_worker(&self, agent: &str) -> bool {
        !self.is_planner(agent)
    }
}

fn orchestrator_of(events: &[TraceEvent]) -> Option<String> {
    if let Some(roster) = roster_of(events) {
        if let Some(e) = roster.iter().find(|e| e.role == Role::Orchestrator) {
            return Some(e.name.to_string());
        }
    }
    events
        .iter()
        .find(|e| e.kind == EventKind::Send && e.payload.sender.as_deref() == Some(USER))
        .and_then(|e| e.payload.recipient.clone())
}

fn planners_of(events: &[TraceEvent]) -> BTreeSet<String> {
    match roster_of(events) {
        Some(r) if !r.is_empty() => r.iter().filter(|e| e.role == Role::Planner).map(|e| e.name.to_string()).collect(),
        _ => events
            .iter()
            .filter_map(|e| e.payload.recipient.as_deref())
            .filter(|n| n.contains("planner"))
            .map(ToString::to_string)
            .collect(),
    }
}

fn parse_response(seq: u64, content: &str) -> Response {
    let has_tasks = parse_tasks(content).is_ok();
    match WorkerReport::parse(content) {
        Ok(Some(r)) => Response { seq, status: r.status, notes: r.notes, body: r.body, has_tasks, inferred: false },
        _ => Response {
            seq,
            status: infer_status(content),
            notes: None,
            body: content.to_string(),
            has_tasks,
            inferred: true,
        },
    }
}

fn exchanges(events: &[TraceEvent]) -> Exchanges {
    let orch = orchestrator_of(events).unwrap_or_default();
    let mut items: Vec<Exchange> = Vec::new();
    let mut pending: Option<&TraceEvent> = None;

    for e in events {
        let p = &e.payload;
        match e.kind {
            EventKind::Dispatch => pending = Some(e),
            EventKind::SendRejected if p.sender.as_deref() == Some(orch.as_str()) => pending = None,
            EventKind::Send if p.sender.as_deref() == Some(orch.as_str()) => {
                let target = p.recipient.clone().unwrap_or_default();
                let dispatch = pending.take();
                let action = match (dispatch.and_then(|d| d.payload.action), p.msg_kind) {
                    (Some(a), _) => a,
                    (None, Some(crate::model::MessageKind::Inquiry)) => DirectiveAction::Inquiry,
                    (None, _) => DirectiveAction::Instruction,
                };
                let (criteria, prune) = dispatch
                    .map(|d| (d.payload.criteria.clone(), d.payload.prune.clone()))
                    .unwrap_or_default();
                items.push(Exchange {
                    dispatch_seq: dispatch.map(|d| d.seq).unwrap_or(e.seq),
                    target,
                    action,
                    content: p.content.clone().unwrap_or_default(),
                    criteria,
                    prune,
                    response: None,
                });
            }
            EventKind::Send if p.recipient.as_deref() == Some(orch.as_str()) && p.sender.as_deref() != Some(USER) => {
                let sender = p.sender.as_deref().unwrap_or_default();
                if let Some(x) = items.iter_mut().rev().find(|x| x.target == sender && x.response.is_none()) {
                    x.response = Some(parse_response(e.seq, p.content.as_deref().unwrap_or_default()));
                }
            }
            _ => {}
        }
    }
    Exchanges { items, planners: planners_of(events) }
}

fn check_a2a(events: &[TraceEvent]) -> Result<(), AnalysisError> {
    if events.iter().any(|e| e.mode != Mode::A2a) {
        return Err(AnalysisError::NotA2a);
    }
    if !is_terminal(events) {
        return Err(AnalysisError::IncompleteTrace);
    }
    Ok(())
}

fn evidence_of(x: &Exchange, next: Option<&Exchange>) -> Vec<u64> {
    let mut ev = Vec::new();
    ev.push(x.dispatch_seq);
    if let Some(r) = &x.response {
        ev.push(r.seq);
    }
    if let Some(n) = next {
        ev.push(n.dispatch_seq);
    }
    ev
}

fn inferred(x: &Exchange) -> bool {
    x.response.as_ref().is_some_and(|r| r.inferred)
}

pub fn classify_patterns(events: &[TraceEvent]) -> Result<Vec<PatternInstance>, AnalysisError> {
    check_a2a(events)?;
    let ex = exchanges(events);
    let xs = &ex.items;
    let mut out: Vec<PatternInstance> = Vec::new();

    let mut decomposed = false;
    for x in xs {
        if ex.is_planner(&x.target) {
            decomposed |= x.response.as_ref().is_some_and(|r| r.has_tasks);
            continue;
        }
        if !decomposed {
            out.push(PatternInstance { pattern: Pattern::DirectDispatch, evidence: evidence_of(x, None), low_confidence: inferred(x) });
        }
        break;
    }

    for (i, x) in xs.iter().enumerate() {
        if !ex.is_planner(&x.target) || !x.response.as_ref().is_some_and(|r| r.has_tasks) {
            continue;
        }
        if let Some(next) = xs[i + 1..].iter().find(|n| ex.is_worker(&n.target)) {
            out.push(PatternInstance {
                pattern: Pattern::PlannerMediated,
                evidence: evidence_of(x, Some(next)),
                low_confidence: inferred(x),
            });
        }
    }

    for w in xs.windows(2) {
        let (x, next) = (&w[0], &w[1]);
        let Some(r) = &x.response else { continue };
        if ex.is_planner(&x.target) || next.action != DirectiveAction::Instruction || !ex.is_worker(&next.target) {
            continue;
        }
        let refined = next.target == x.target
            && x.action == DirectiveAction::Instruction
            && matches!(r.status, ReportStatus::Partial | ReportStatus::Failed)
            && next.content != x.content;
        let substituted = next.target != x.target && r.status == ReportStatus::Failed;
        let pattern = if refined {
            Pattern::InstructionRefinement
        } else if substituted {
            Pattern::AgentSubstitution
        } else {
            continue;
        };
        out.push(PatternInstance { pattern, evidence: evidence_of(x, Some(next)), low_confidence: r.inferred });
    }

    out.sort_by(|a, b| (&a.evidence, a.pattern).cmp(&(&b.evidence, b.pattern)));
    out.dedup_by(|a, b| a.evidence == b.evidence);
    Ok(out)
}

pub fn detect_edge_handling(events: &[TraceEvent]) -> Result<Vec<StrategyInstance>, AnalysisError> {
    check_a2a(events)?;
    let ex = exchanges(events);
    let mut out = Vec::new();

    for w in ex.items.windows(2) {
        let (x, next) = (&w[0], &w[1]);
        let Some(r) = &x.response else { continue };
        let evidence = alloc::vec![r.seq, next.dispatch_seq];

        if r.status == ReportStatus::Partial
            && next.target == x.target
            && next.action == DirectiveAction::Instruction
            && !next.criteria.is_empty()
        {
            out.push(StrategyInstance {
                strategy: Strategy::CriteriaTightening,
                evidence: evidence.clone(),
                items: Vec::new(),
                low_confidence: r.inferred,
            });
        }

        if !next.prune.is_empty()
            && next.prune.iter().all(|item| contains_ci(&r.body, item) && !contains_ci(&next.content, item))
        {
            out.push(StrategyInstance {
                strategy: Strategy::SemanticAudit,
                evidence: evidence.clone(),
                items: next.prune.clone(),
                low_confidence: r.inferred,
            });
        }

        let cue_text = r.notes.as_deref().unwrap_or(if r.inferred { r.body.as_str() } else { "" });
        if ex.is_worker(&x.target)
            && ex.is_planner(&next.target)
            && ESCALATION_CUES.iter().any(|c| contains_ci(cue_text, c))
        {
            out.push(StrategyInstance {
                strategy: Strategy::AlignmentEscalation,
                evidence,
                items: Vec::new(),
                low_confidence: r.inferred,
            });
        }
    }
    Ok(out)
}

/// Token totals per agent and overall.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageReport {
    pub per_agent: BTreeMap<String, TokenUsage>,
    pub total: TokenUsage,
}

pub fn session_usage(events: &[TraceEvent]) -> UsageReport {
    let mut per_agent: BTreeMap<String, TokenUsage> = BTreeMap::new();
    let mut total = TokenUsage::ZERO;
    for e in events.iter().filter(|e| e.tokens > 0) {
        let p = &e.payload;
        let usage = match (p.prompt_tokens, p.completion_tokens) {
            (Some(pt), Some(ct)) => TokenUsage {
                prompt_tokens: pt,
                completion_tokens: ct,
                source: p.usage_source.unwrap_or(UsageSource::Estimated),
            },
            _ => TokenUsage { prompt_tokens: e.tokens, completion_tokens: 0, source: UsageSource::Estimated },
        };
        let agent = p.agent.clone().unwrap_or_default();
        let slot = per_agent.entry(agent).or_insert(TokenUsage::ZERO);
        *slot = slot.combine(usage);
        total = total.combine(usage);
    }
    UsageReport { per_agent, total }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub tokens: u64,
    pub fraction: f64,
}

/// Empirical CDF of session token totals, one curve per mode. The domain is
/// the set of distinct observed totals; the last point of each curve is 1.0.
pub fn token_cdf(traces: &[&[TraceEvent]]) -> Result<BTreeMap<Mode, Vec<CdfPoint>>, AnalysisError> {
    if traces.is_empty() {
        return Err(AnalysisError::EmptyInput);
    }
    let mut totals: BTreeMap<Mode, Vec<u64>> = BTreeMap::new();
    for t in traces {
        if !is_terminal(t) {
            return Err(AnalysisError::IncompleteTrace);
        }
        let mode = crate::trace::mode_of(t).ok_or(AnalysisError::IncompleteTrace)?;
        totals.entry(mode).or_default().push(crate::trace::total_tokens(t));
    }
    Ok(totals.into_iter().map(|(m, v)| (m, cdf_of(v))).collect())
}

pub fn cdf_of(mut totals: Vec<u64>) -> Vec<CdfPoint> {
    totals.sort_unstable();
    let n = totals.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, t) in totals.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.tokens == *t => last.fraction = fraction,
            _ => out.push(CdfPoint { tokens: *t, fraction }),
        }
    }
    out
}

/// Value of a step CDF at `tokens`.
pub fn cdf_at(curve: &[CdfPoint], tokens: u64) -> f64 {
    curve.iter().take_while(|p| p.tokens <= tokens).last().map(|p| p.fraction).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_single_and_two_points() {
        assert_eq!(cdf_of(alloc::vec![100]), [CdfPoint { tokens: 100, fraction: 1.0 }]);
        assert_eq!(
            cdf_of(alloc::vec![200, 100]),
            [CdfPoint { tokens: 100, fraction: 0.5 }, CdfPoint { tokens: 200, fraction: 1.0 }]
        );
        let tied = cdf_of(alloc::vec![5, 5, 7, 5]);
        assert_eq!(tied, [CdfPoint { tokens: 5, fraction: 0.75 }, CdfPoint { tokens: 7, fraction: 1.0 }]);
        assert_eq!(cdf_at(&tied, 4), 0.0);
        assert_eq!(cdf_at(&tied, 6), 0.75);
    }

    #[test]
    fn empty_input() {
        assert_eq!(token_cdf(&[]), Err(AnalysisError::EmptyInput));
    }

    #[test]
    fn usage_of_nothing_is_zero() {
        let r = session_usage(&[]);
        assert!(r.per_agent.is_empty());
        assert_eq!(r.total.total(), 0);
    }
}
