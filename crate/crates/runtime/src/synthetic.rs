//! Seeded synthetic scenarios: an N-step task whose k-th subtask fails (or
//! comes back partial) on first attempt, with large tool outputs so that
//! redoing work shows up in token counts.
//!
//! Both modes share one worker table. Workers tell a workflow mention from
//! an orchestrator instruction by the `Overall task:` header the workflow
//! controller adds, so the injected step can misbehave differently per mode:
//! in workflow mode it always fails outright, since a partial report would
//! be accepted there without any replanning.

use std::collections::{BTreeMap, BTreeSet};

use infoflow_core::script::{Pattern, Rule, Script};
use infoflow_core::toolkit::{EXTRACT_DOCUMENT_CONTENT, EXTRACT_EXCEL_CONTENT, SEARCH_GOOGLE};
use infoflow_core::workflow::{ASSEMBLE_PREFIX, DECOMPOSE_PREFIX, REPLAN_PREFIX};
use infoflow_core::{render_tasks, AgentRoster, Role, SubtaskList, WorkerReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scenario::{FailureInjection, FailureKind, Scenario};
use crate::tools::{Fixture, Fixtures};

/// Phrase that turns a first attempt into a retry with the full source.
pub const RETRY_MARK: &str = "complete source";
const CONFIRM_PREFIX: &str = "Please confirm the final answer:";
const WORKFLOW_HEADER: &str = "Overall task:";

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid synthetic parameters: need 1 <= k <= n, got n={n}, k={k}")]
pub struct InvalidParams {
    pub n: usize,
    pub k: usize,
}

struct Step {
    index: usize,
    role: Role,
    tool: &'static str,
    entity: String,
    text: String,
    value: u32,
}

const ATTRIBUTES: [&str; 5] = ["founding year", "population", "length", "peak value", "average rate"];

fn filler(rng: &mut ChaCha8Rng, size: std::ops::Range<usize>) -> String {
    let chars = rng.random_range(size);
    let mut out = String::with_capacity(chars + 64);
    let mut j = 0;
    while out.len() < chars {
        j += 1;
        let (a, b, c): (u32, u32, u32) = (rng.random_range(0..10_000), rng.random_range(0..1_000_000), rng.random());
        out.push_str(&format!("record {j}: field-{a} value {b} checksum {c:08x}\n"));
    }
    out
}

fn report(body: &str) -> String {
    WorkerReport::complete(body).render()
}

fn directive(action: &str, target: &str, extra: &str, content: &str) -> String {
    format!("action: {action}\ntarget: {target}\n{extra}content: {content}")
}

/// Builds the scenario for `n` subtasks with an injected outcome at step `k`.
pub fn generate_synthetic(n: usize, k: usize, kind: FailureKind, seed: u64) -> Result<Scenario, InvalidParams> {
    if n == 0 || k == 0 || k > n {
        return Err(InvalidParams { n, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let roster = AgentRoster::standard();
    let agent = |role: Role| roster.agent_for(role).expect("standard roster has every role").to_string();

    let mut used = BTreeSet::new();
    let steps: Vec<Step> = (1..=n)
        .map(|index| {
            let entity = loop {
                let e = format!("site-{}", rng.random_range(1000..10_000));
                if used.insert(e.clone()) {
                    break e;
                }
            };
            let attr = ATTRIBUTES[rng.random_range(0..ATTRIBUTES.len())];
            let (role, tool, text) = match rng.random_range(0..3) {
                0 => (Role::Web, SEARCH_GOOGLE, format!("Search the web for the {attr} of {entity}")),
                1 => (
                    Role::Document,
                    EXTRACT_DOCUMENT_CONTENT,
                    format!("Read the document describing {entity} and extract its {attr}"),
                ),
                _ => (Role::ReasoningCoding, EXTRACT_EXCEL_CONTENT, format!("Compute the {attr} total for {entity} from its spreadsheet")),
            };
            Step { index, role, tool, entity, text, value: rng.random_range(100..1000) }
        })
        .collect();

    let answer = steps.iter().map(|s| s.value.to_string()).collect::<Vec<_>>().join(", ");
    let query = format!("Complete the {n}-step synthetic lookup task number {seed} and list every value found, in order.");
    let injected = kind != FailureKind::None;

    let mut fixtures = Vec::new();
    let mut workers: BTreeMap<Role, Vec<Rule>> = BTreeMap::new();
    for s in &steps {
        let i = s.index;
        let rules = workers.entry(s.role).or_default();
        let full = |args: String, rng: &mut ChaCha8Rng| Fixture {
            tool: s.tool.to_string(),
            args,
            output: format!("RESULT-{i}: {}\n{}", s.value, filler(rng, 12_000..32_000)),
            ok: true,
        };
        let call = |args: &str| format!("call: {}\nargs: {args}", s.tool);

        if injected && i == k {
            let retry = format!("subtask {i} {} complete", s.entity);
            let failing = format!("subtask {i} {}", s.entity);
            fixtures.push(full(retry.clone(), &mut rng));
            fixtures.push(Fixture {
                tool: s.tool.to_string(),
                args: failing.clone(),
                output: format!("UNAVAILABLE-{i}: the source did not respond"),
                ok: false,
            });
            rules.push(Rule::new(Pattern::contains(&s.entity).and(RETRY_MARK), call(&retry)));
            rules.push(Rule::new(Pattern::contains(&s.entity).and(WORKFLOW_HEADER), call(&failing)));
            if kind == FailureKind::Partial {
                let partial = format!("subtask {i} {} partial", s.entity);
                let half = filler(&mut rng, 6_000..16_000);
                fixtures.push(Fixture {
                    tool: s.tool.to_string(),
                    args: partial.clone(),
                    output: format!("INCOMPLETE-{i}: only the first half of the records were returned\n{half}"),
                    ok: true,
                });
                rules.push(Rule::new(Pattern::contains(&s.entity), call(&partial)));
                rules.push(Rule::new(
                    Pattern::contains("[tool_result").and(format!("INCOMPLETE-{i}:")),
                    WorkerReport::new(
                        infoflow_core::ReportStatus::Partial,
                        format!("I could not complete subtask {i}: only part of the records were found."),
                        Some("records after the first half are missing".into()),
                    )
                    .expect("partial report has notes")
                    .render(),
                ));
            } else {
                rules.push(Rule::new(Pattern::contains(&s.entity), call(&failing)));
            }
            rules.push(Rule::new(
                Pattern::contains("[tool_result").and(format!("UNAVAILABLE-{i}:")),
                WorkerReport::failed(format!("I could not complete subtask {i}: the source was unavailable."), "source unavailable")
                    .render(),
            ));
        } else {
            let args = format!("subtask {i} {}", s.entity);
            fixtures.push(full(args.clone(), &mut rng));
            rules.push(Rule::new(Pattern::contains(&s.entity), call(&args)));
        }
        rules.push(Rule::new(
            Pattern::contains("[tool_result").and(format!("RESULT-{i}:")),
            report(&format!("Result for subtask {i}: {}", s.value)),
        ));
    }

    let texts = |revised: bool| {
        let list = SubtaskList::new(steps.iter().map(|s| {
            if revised && s.index == k {
                format!("{} (use the {RETRY_MARK})", s.text)
            } else {
                s.text.clone()
            }
        }))
        .expect("synthetic subtasks are valid");
        render_tasks(&list)
    };
    workers.insert(
        Role::Planner,
        vec![
            Rule::new(Pattern::contains(REPLAN_PREFIX), texts(true)),
            Rule::new(Pattern::contains(DECOMPOSE_PREFIX), texts(false)),
            Rule::new(Pattern::contains(ASSEMBLE_PREFIX), report(&answer)),
            Rule::new(Pattern::contains(CONFIRM_PREFIX), report("Confirmed.")),
        ],
    );

    let planner = agent(Role::Planner);
    let mut orch = vec![Rule::new(
        Pattern::contains("[user ->"),
        directive("inquiry", &planner, "", &format!("{DECOMPOSE_PREFIX} Task: {query}")),
    )];
    orch.push(Rule::new(Pattern::contains("<tasks>"), directive("instruction", &agent(steps[0].role), "", &steps[0].text)));
    for s in &steps {
        let next = match steps.get(s.index) {
            Some(n) => directive("instruction", &agent(n.role), "", &n.text),
            None => directive("inquiry", &planner, "", &format!("{CONFIRM_PREFIX} {answer}")),
        };
        orch.push(Rule::new(Pattern::contains(format!("Result for subtask {}:", s.index)), next));
    }
    if injected {
        let s = &steps[k - 1];
        let criteria = match kind {
            FailureKind::Partial => format!("criteria: every record for subtask {k}\n"),
            _ => String::new(),
        };
        orch.push(Rule::new(
            Pattern::contains(format!("could not complete subtask {k}:")),
            directive("instruction", &agent(s.role), &criteria, &format!("{}. Use the {RETRY_MARK}.", s.text)),
        ));
    }
    orch.push(Rule::new(Pattern::contains("Confirmed."), format!("action: submit\ncontent: {answer}")));

    Ok(Scenario {
        name: format!("synthetic-n{n}-k{k}-{}-s{seed}", kind_label(kind)),
        description: Some(format!("{n} subtasks, injected {} at subtask {k}", kind_label(kind))),
        query,
        expected_answer: answer,
        roster,
        fixtures: Fixtures::new(fixtures),
        orchestrator: Script::new(orch),
        workers: workers.into_iter().map(|(r, rules)| (r, Script::new(rules))).collect(),
        failure_injection: Some(FailureInjection { subtask: k, kind }),
    })
}

pub fn kind_label(kind: FailureKind) -> &'static str {
    match kind {
        FailureKind::None => "none",
        FailureKind::Partial => "partial",
        FailureKind::Failed => "failed",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::parse_scenario;

    #[test]
    fn rejects_out_of_range() {
        assert_eq!(generate_synthetic(3, 0, FailureKind::Failed, 1).unwrap_err(), InvalidParams { n: 3, k: 0 });
        assert!(generate_synthetic(3, 4, FailureKind::Failed, 1).is_err());
        assert!(generate_synthetic(0, 0, FailureKind::None, 1).is_err());
    }

    #[test]
    fn seeded_and_valid() {
        let a = generate_synthetic(3, 3, FailureKind::Partial, 7).unwrap();
        let b = generate_synthetic(3, 3, FailureKind::Partial, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_synthetic(3, 3, FailureKind::Partial, 8).unwrap());
        // the generated tables pass the same validation as hand-written files
        let back = parse_scenario(&a.to_toml(), "synthetic").unwrap();
        assert_eq!(back, a);
    }
}
