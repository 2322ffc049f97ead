//! Runs one scenario under each coordination mode and summarizes the
//! outcomes side by side.

use std::path::{Path, PathBuf};

use infoflow_core::analysis::{classify_patterns, detect_edge_handling, Pattern, Strategy};
use infoflow_core::text::answers_match;
use infoflow_core::trace::{total_tokens, EventKind, Mode, TraceEvent};
use infoflow_core::SubmitReason;

use crate::backend::RemoteConfig;
use crate::error::RunError;
use crate::scenario::{load_scenario, packaged, scenario_files, FailureKind, Scenario};
use crate::session::{run_session, RemoteFactory, ScriptedFactory, SessionInput, SessionOutcome, Settings};
use crate::synthetic::generate_synthetic;

#[derive(Clone, Debug)]
pub enum BackendChoice {
    Scripted,
    Remote(RemoteConfig),
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Template; mode, seed and trace path are filled in per run.
    pub settings: Settings,
    pub backend: BackendChoice,
    pub trace_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { settings: Settings::default(), backend: BackendChoice::Scripted, trace_dir: None }
    }
}

pub fn trace_file(dir: &Path, input: &SessionInput) -> PathBuf {
    dir.join(format!("{}.jsonl", input.id))
}

/// One session of `scenario` in `mode`.
pub fn run_mode(scenario: &Scenario, mode: Mode, seed: u64, opts: &RunOptions) -> Result<SessionOutcome, RunError> {
    let input = SessionInput::from_scenario(scenario, mode, seed);
    let settings = Settings {
        mode,
        seed,
        trace_path: opts.trace_dir.as_deref().map(|d| trace_file(d, &input)),
        ..opts.settings.clone()
    };
    match &opts.backend {
        BackendChoice::Scripted => run_session(&input, &settings, &mut ScriptedFactory { scenario }),
        BackendChoice::Remote(config) => {
            run_session(&input, &settings, &mut RemoteFactory { config: config.clone(), scenario })
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSummary {
    pub answer: String,
    pub reason: SubmitReason,
    pub correct: bool,
    pub tokens: u64,
    pub replans: u32,
    pub patterns: Vec<Pattern>,
    pub strategies: Vec<Strategy>,
    pub trace: Option<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct ModeResult {
    pub mode: Mode,
    pub outcome: Result<ModeSummary, String>,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub scenario: String,
    pub expected_answer: String,
    pub results: Vec<ModeResult>,
}

impl Report {
    pub fn all_completed(&self) -> bool {
        self.results.iter().all(|r| r.outcome.is_ok())
    }

    pub fn result(&self, mode: Mode) -> Option<&ModeSummary> {
        self.results.iter().find(|r| r.mode == mode).and_then(|r| r.outcome.as_ref().ok())
    }
}

/// Replans the workflow controller announced.
pub fn replan_count(events: &[TraceEvent]) -> u32 {
    let announced = |e: &&TraceEvent| {
        e.kind == EventKind::Observe && e.payload.detail.as_deref().is_some_and(|d| d.starts_with("replan "))
    };
    events.iter().filter(announced).count() as u32
}

fn dedup<T: PartialEq + Copy>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for i in items {
        if !out.contains(&i) {
            out.push(i);
        }
    }
    out
}

pub fn summarize(scenario: &Scenario, mode: Mode, outcome: &SessionOutcome, trace: Option<PathBuf>) -> ModeSummary {
    let events = &outcome.events;
    let (patterns, strategies) = match mode {
        Mode::A2a => (
            dedup(classify_patterns(events).unwrap_or_default().iter().map(|p| p.pattern)),
            dedup(detect_edge_handling(events).unwrap_or_default().iter().map(|s| s.strategy)),
        ),
        Mode::Workflow => (Vec::new(), Vec::new()),
    };
    ModeSummary {
        answer: outcome.record.answer.clone(),
        reason: outcome.record.reason,
        correct: answers_match(&outcome.record.answer, &scenario.expected_answer),
        tokens: total_tokens(events),
        replans: replan_count(events),
        patterns,
        strategies,
        trace,
    }
}

/// Runs each mode with a fresh session; a failing mode does not stop the others.
pub fn run_comparison(scenario: &Scenario, modes: &[Mode], seed: u64, opts: &RunOptions) -> Report {
    let results = modes
        .iter()
        .map(|&mode| {
            let trace = opts.trace_dir.as_deref().map(|d| trace_file(d, &SessionInput::from_scenario(scenario, mode, seed)));
            let outcome =
                run_mode(scenario, mode, seed, opts).map(|o| summarize(scenario, mode, &o, trace)).map_err(|e| e.to_string());
            ModeResult { mode, outcome }
        })
        .collect();
    Report { scenario: scenario.name.clone(), expected_answer: scenario.expected_answer.clone(), results }
}

fn parse_synthetic(spec: &str, seed: u64) -> Result<Scenario, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [_, n, k, kind] = parts[..] else { return Err(format!("{spec}: expected synthetic:N:K:KIND")) };
    let n = n.parse().map_err(|_| format!("{spec}: N is not a number"))?;
    let k = k.parse().map_err(|_| format!("{spec}: K is not a number"))?;
    let kind = FailureKind::parse(kind).ok_or_else(|| format!("{spec}: KIND must be none, partial or failed"))?;
    generate_synthetic(n, k, kind, seed).map_err(|e| e.to_string())
}

/// Every scenario a command-line target names: a `.scn` file, a directory of
/// them, a packaged scenario name, or `synthetic:N:K:KIND` (generated with `seed`).
pub fn resolve_target(target: &str, seed: u64) -> Result<Vec<Scenario>, String> {
    if target.starts_with("synthetic:") {
        return parse_synthetic(target, seed).map(|s| vec![s]);
    }
    let path = Path::new(target);
    if path.is_dir() {
        let files = scenario_files(path).map_err(|e| format!("{target}: {e}"))?;
        if files.is_empty() {
            return Err(format!("{target}: no .scn files"));
        }
        return files.iter().map(|f| load_scenario(f).map_err(|e| e.to_string())).collect();
    }
    if path.exists() {
        return load_scenario(path).map(|s| vec![s]).map_err(|e| e.to_string());
    }
    match packaged(target) {
        Some(r) => r.map(|s| vec![s]).map_err(|e| e.to_string()),
        None => Err(format!("{target}: no such file or packaged scenario")),
    }
}
