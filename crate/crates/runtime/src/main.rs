use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use infoflow_core::analysis::{classify_patterns, detect_edge_handling, session_usage, token_cdf, AnalysisError};
use infoflow_core::trace::{Mode, TraceEvent};
use infoflow_runtime::compare::{resolve_target, run_comparison, BackendChoice, Report, RunOptions};
use infoflow_runtime::config::Config;
use infoflow_runtime::replay::replay;
use infoflow_runtime::report::{cdf_table, comparison_table, instances_table, usage_table, Format, SessionAnalysis};
use infoflow_runtime::scenario::Scenario;
use infoflow_runtime::trace::read_trace;

#[derive(Parser)]
#[command(name = "infoflow", version, about = "Run, compare, analyze and replay orchestrated multi-agent sessions")]
struct Cli {
    /// Run configuration (roster, prompts, endpoint, session settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    A2a,
    Workflow,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::A2a => Mode::A2a,
            ModeArg::Workflow => Mode::Workflow,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Scripted,
    Remote,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Execution-time budget, e.g. `30m`, `90s`, `200ms`.
    #[arg(long, value_parser = humantime::parse_duration)]
    budget: Option<Duration>,
    #[arg(long, value_enum, default_value = "scripted")]
    backend: BackendArg,
    #[arg(long, default_value = "traces")]
    trace_dir: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one session. SCENARIO is a `.scn` file, a packaged scenario name,
    /// or `synthetic:N:K:KIND` with KIND one of none, partial, failed.
    Run {
        scenario: String,
        #[arg(long, value_enum, default_value = "a2a")]
        mode: ModeArg,
        #[command(flatten)]
        common: Common,
    },
    /// Run every scenario under both modes and print a comparison table.
    Compare {
        /// Scenario files, directories of `.scn` files, packaged names or synthetic specs.
        #[arg(required = true)]
        targets: Vec<String>,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run scenarios concurrently (modes of one scenario stay sequential).
        #[arg(long)]
        parallel: bool,
    },
    /// Classify coordination patterns and edge-case strategies, and tabulate tokens.
    Analyze {
        #[arg(required = true)]
        traces: Vec<PathBuf>,
        #[arg(long)]
        patterns: bool,
        #[arg(long)]
        strategies: bool,
        #[arg(long)]
        token_cdf: bool,
        /// Per-agent token usage.
        #[arg(long)]
        usage: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Re-run a scripted trace from its recorded completions and compare.
    Replay { trace: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(p) => match Config::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => Config::default(),
    };
    let result = match cli.cmd {
        Cmd::Run { scenario, mode, common } => run(&config, &scenario, mode.into(), &common),
        Cmd::Compare { targets, common, format, out, parallel } => {
            compare(&config, &targets, &common, format, out.as_deref(), parallel)
        }
        Cmd::Analyze { traces, patterns, strategies, token_cdf, usage, format } => {
            let all = !(patterns || strategies || token_cdf || usage);
            analyze(&traces, patterns || all, strategies || all, token_cdf || all, usage, format)
        }
        Cmd::Replay { trace } => replay_cmd(&trace),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

type CmdResult = Result<bool, String>;

fn options(config: &Config, common: &Common) -> Result<RunOptions, String> {
    let mut settings = config.settings();
    if let Some(b) = common.budget {
        settings.budget = b;
    }
    let backend = match common.backend {
        BackendArg::Scripted => BackendChoice::Scripted,
        BackendArg::Remote => {
            settings.live = true;
            let remote = config.remote.clone().ok_or("--backend remote needs a [remote] section in --config")?;
            BackendChoice::Remote(remote)
        }
    };
    Ok(RunOptions { settings, backend, trace_dir: Some(common.trace_dir.clone()) })
}

fn with_roster(config: &Config, mut s: Scenario) -> Scenario {
    if let Some(r) = &config.roster {
        s.roster = r.clone();
    }
    s
}

fn run(config: &Config, target: &str, mode: Mode, common: &Common) -> CmdResult {
    let opts = options(config, common)?;
    let mut scenarios = resolve_target(target, common.seed)?;
    if scenarios.len() != 1 {
        return Err(format!("{target}: run takes exactly one scenario"));
    }
    let s = with_roster(config, scenarios.remove(0));
    let report = run_comparison(&s, &[mode], common.seed, &opts);
    print!("{}", comparison_table(std::slice::from_ref(&report)).text());
    report_errors(&report);
    Ok(report.all_completed())
}

fn report_errors(r: &Report) {
    for m in &r.results {
        match &m.outcome {
            Err(e) => eprintln!("{} {}: {e}", r.scenario, m.mode),
            Ok(s) => {
                if let Some(t) = &s.trace {
                    eprintln!("{} {}: trace {}", r.scenario, m.mode, t.display());
                }
            }
        }
    }
}

fn compare(
    config: &Config,
    targets: &[String],
    common: &Common,
    format: Format,
    out: Option<&Path>,
    parallel: bool,
) -> CmdResult {
    let opts = options(config, common)?;
    let mut scenarios = Vec::new();
    for t in targets {
        scenarios.extend(resolve_target(t, common.seed)?.into_iter().map(|s| with_roster(config, s)));
    }
    let modes = [Mode::A2a, Mode::Workflow];
    let reports: Vec<Report> = if parallel {
        std::thread::scope(|scope| {
            let joins: Vec<_> = scenarios
                .iter()
                .map(|s| scope.spawn(|| run_comparison(s, &modes, common.seed, &opts)))
                .collect();
            joins.into_iter().map(|j| j.join().expect("comparison thread panicked")).collect()
        })
    } else {
        scenarios.iter().map(|s| run_comparison(s, &modes, common.seed, &opts)).collect()
    };
    let table = comparison_table(&reports).render(format);
    print!("{table}");
    if let Some(path) = out {
        std::fs::write(path, &table).map_err(|e| format!("{}: {e}", path.display()))?;
    }
    reports.iter().for_each(report_errors);
    Ok(reports.iter().all(Report::all_completed))
}

fn analyze(
    paths: &[PathBuf],
    patterns: bool,
    strategies: bool,
    cdf: bool,
    usage: bool,
    format: Format,
) -> CmdResult {
    let mut ok = true;
    let mut traces: Vec<Vec<TraceEvent>> = Vec::new();
    for p in paths {
        match read_trace(p) {
            Ok(t) => traces.push(t),
            Err(e) => {
                eprintln!("{e}");
                ok = false;
            }
        }
    }
    let mut sections = Vec::new();

    if patterns || strategies {
        let mut rows = Vec::new();
        for t in &traces {
            let session = t.first().map(|e| e.session.clone()).unwrap_or_default();
            let mut a = SessionAnalysis { session: session.clone(), ..SessionAnalysis::default() };
            let result = (|| -> Result<(), AnalysisError> {
                if patterns {
                    a.patterns = classify_patterns(t)?;
                }
                if strategies {
                    a.strategies = detect_edge_handling(t)?;
                }
                Ok(())
            })();
            match result {
                Ok(()) => rows.push(a),
                Err(AnalysisError::NotA2a) => eprintln!("{session}: not an a2a trace; patterns skipped"),
                Err(e) => {
                    eprintln!("{session}: {e}");
                    ok = false;
                }
            }
        }
        sections.push(instances_table(&rows).render(format));
    }
    if usage {
        let rows: Vec<_> = traces
            .iter()
            .filter_map(|t| t.first().map(|e| (e.session.clone(), e.mode, session_usage(t))))
            .collect();
        sections.push(usage_table(&rows).render(format));
    }
    if cdf {
        let refs: Vec<&[TraceEvent]> = traces.iter().map(Vec::as_slice).collect();
        match token_cdf(&refs) {
            Ok(curves) => sections.push(cdf_table(&curves).render(format)),
            Err(e) => {
                eprintln!("token cdf: {e}");
                ok = false;
            }
        }
    }
    print!("{}", sections.join("\n"));
    Ok(ok)
}

fn analysis_text(events: &[TraceEvent]) -> String {
    let a = SessionAnalysis {
        session: events.first().map(|e| e.session.clone()).unwrap_or_default(),
        patterns: classify_patterns(events).unwrap_or_default(),
        strategies: detect_edge_handling(events).unwrap_or_default(),
    };
    instances_table(&[a]).text()
}

fn replay_cmd(path: &Path) -> CmdResult {
    let events = read_trace(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let out = replay(&events).map_err(|e| e.to_string())?;
    let same_analysis = analysis_text(&out.original) == analysis_text(&out.replayed);
    match out.first_difference {
        None => println!("identical: {} events", out.replayed.len()),
        Some(i) => {
            println!("differs at event {}", i + 1);
            let line = |evs: &[TraceEvent]| evs.get(i).map(|e| serde_json::to_string(e).unwrap_or_default());
            println!("- {}", line(&out.original).unwrap_or_else(|| "(end of trace)".into()));
            println!("+ {}", line(&out.replayed).unwrap_or_else(|| "(end of trace)".into()));
        }
    }
    println!("analysis: {}", if same_analysis { "identical" } else { "differs" });
    Ok(out.identical() && same_analysis)
}
