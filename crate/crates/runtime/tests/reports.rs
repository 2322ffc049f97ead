//! Report tables against golden files. Set `INFOFLOW_BLESS=1` to rewrite them.

mod common;

use infoflow_runtime::compare::{resolve_target, run_comparison, RunOptions};
use infoflow_runtime::core::analysis::{classify_patterns, detect_edge_handling, session_usage, token_cdf};
use infoflow_runtime::core::{Mode, TraceEvent};
use infoflow_runtime::report::{cdf_table, comparison_table, instances_table, usage_table, Format, SessionAnalysis};

fn check_golden(name: &str, actual: &str) {
    let path = common::manifest_dir().join("tests/golden").join(name);
    if std::env::var_os("INFOFLOW_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "{name} drifted from its golden file");
}

#[test]
fn comparison_of_packaged_scenarios() {
    let dir = common::manifest_dir().join("scenarios");
    let scenarios = resolve_target(dir.to_str().unwrap(), 0).unwrap();
    let reports: Vec<_> =
        scenarios.iter().map(|s| run_comparison(s, &[Mode::A2a, Mode::Workflow], 0, &RunOptions::default())).collect();
    let table = comparison_table(&reports);
    check_golden("compare.txt", &table.render(Format::Text));
    check_golden("compare.csv", &table.render(Format::Csv));
}

#[test]
fn analysis_of_the_corpus() {
    let traces: Vec<Vec<TraceEvent>> = common::corpus_labels().iter().map(common::Labeled::stored).collect();
    let sessions: Vec<SessionAnalysis> = traces
        .iter()
        .map(|t| SessionAnalysis {
            session: t[0].session.clone(),
            patterns: classify_patterns(t).unwrap(),
            strategies: detect_edge_handling(t).unwrap(),
        })
        .collect();
    check_golden("instances.txt", &instances_table(&sessions).text());

    let usage: Vec<_> = traces.iter().map(|t| (t[0].session.clone(), t[0].mode, session_usage(t))).collect();
    check_golden("usage.csv", &usage_table(&usage).csv());

    let refs: Vec<&[TraceEvent]> = traces.iter().map(Vec::as_slice).collect();
    check_golden("cdf.txt", &cdf_table(&token_cdf(&refs).unwrap()).text());
}
