//! Properties of the public core API.

use infoflow_core::analysis::{cdf_at, cdf_of};
use infoflow_core::workflow::{Judgement, ReplanCounter, SubtaskState, SubtaskStatus};
use infoflow_core::{
    parse_directive, validate_edge, AgentId, Directive, ReportStatus, SubtaskList, TopologyPolicy, WorkerReport,
};
use proptest::prelude::*;

fn agent(name: &str) -> AgentId {
    AgentId::new(name).unwrap()
}

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,.?]{0,40}".prop_map(|s| s.trim().to_string())
}

proptest! {
    #[test]
    fn reports_survive_render_and_parse(
        body in text(),
        notes in proptest::option::of(text().prop_filter("non-empty", |s| !s.is_empty())),
        status in prop_oneof![Just(ReportStatus::Complete), Just(ReportStatus::Partial), Just(ReportStatus::Failed)],
        proposal in any::<bool>(),
    ) {
        let Ok(mut report) = WorkerReport::new(status, body, notes) else {
            prop_assume!(false);
            unreachable!()
        };
        report.proposal = proposal;
        let parsed = WorkerReport::parse(&report.render()).unwrap();
        prop_assert_eq!(parsed, Some(report));
    }

    #[test]
    fn directives_survive_render_and_parse(content in text().prop_filter("non-empty", |s| !s.is_empty())) {
        for d in [
            Directive::instruction(agent("web_agent"), content.clone()).unwrap(),
            Directive::inquiry(agent("planner_agent"), content.clone()).unwrap(),
            Directive::submit(content.clone()).unwrap(),
        ] {
            prop_assert_eq!(parse_directive(&d.render()).unwrap(), d);
        }
    }

    #[test]
    fn star_edges_always_touch_the_orchestrator(a in "[a-z]{1,6}", b in "[a-z]{1,6}") {
        let policy = TopologyPolicy::star(agent("hub"));
        let (a, b) = (agent(&format!("w_{a}")), agent(&format!("w_{b}")));
        prop_assert!(!validate_edge(&policy, &a, &b));
        prop_assert!(validate_edge(&policy, &a, &policy.orchestrator));
        prop_assert!(validate_edge(&policy, &policy.orchestrator, &b));
    }

    #[test]
    fn cdf_is_a_nondecreasing_step_function(totals in proptest::collection::vec(0u64..10_000, 1..50)) {
        let curve = cdf_of(totals.clone());
        prop_assert!(curve.windows(2).all(|w| w[0].tokens < w[1].tokens && w[0].fraction < w[1].fraction));
        prop_assert_eq!(curve.last().unwrap().fraction, 1.0);
        for t in &totals {
            let below = totals.iter().filter(|x| *x <= t).count() as f64 / totals.len() as f64;
            prop_assert!((cdf_at(&curve, *t) - below).abs() < 1e-12);
        }
        if let Some(before) = curve[0].tokens.checked_sub(1) {
            prop_assert_eq!(cdf_at(&curve, before), 0.0);
        }
    }
}

#[test]
fn subtask_states_only_move_forward() {
    let plan = SubtaskList::new(["Find the release year"]).unwrap();
    let mut s = SubtaskState::pending(plan.items()[0].clone(), 1);
    assert!(s.finish(Judgement::Success, "x".into()).is_err());
    s.start().unwrap();
    assert!(s.start().is_err());
    s.finish(Judgement::Failure, "nothing found".into()).unwrap();
    assert_eq!(s.status, SubtaskStatus::Failure);
    assert_eq!(s.result.as_deref(), Some("nothing found"));
    assert!(s.finish(Judgement::Success, "late".into()).is_err());
}

#[test]
fn replan_counter_stops_at_its_cap() {
    let mut c = ReplanCounter::default();
    assert_eq!((1..=3).map(|_| c.try_increment().unwrap()).collect::<Vec<_>>(), [1, 2, 3]);
    assert!(!c.can_replan());
    assert_eq!(c.try_increment().unwrap_err().max, 3);
    assert_eq!(c.attempts(), 3);
    assert!(ReplanCounter::new(0).try_increment().is_err());
}

#[test]
fn partial_reports_must_say_what_is_missing() {
    assert!(WorkerReport::new(ReportStatus::Partial, "half", None).is_err());
    assert!(WorkerReport::parse("half\n\n```report\nstatus: partial\n```").is_err());
    assert_eq!(WorkerReport::parse("just prose").unwrap(), None);
}
