//! Aligned-text and CSV tables for comparison reports and trace analysis.
//!
//! Column sets (frozen by the golden files under `tests/golden/`):
//!
//! - comparison: `scenario mode correct answer tokens replans submit patterns strategies`
//! - instances: `session category name evidence confidence items`
//! - usage: `session mode agent prompt_tokens completion_tokens total`
//! - cdf: `mode tokens fraction`
//!
//! List cells join their items with `;` and an empty list renders as `-`.

use std::collections::BTreeMap;

use infoflow_core::analysis::{CdfPoint, PatternInstance, StrategyInstance, UsageReport};
use infoflow_core::trace::Mode;

use crate::compare::Report;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => self.text(),
            Format::Csv => self.csv(),
        }
    }

    /// Left-aligned columns separated by two spaces, with a dashed rule
    /// under the header. Trailing blanks are trimmed.
    pub fn text(&self) -> String {
        let mut widths: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: Vec<&str>| {
            let mut s = String::new();
            for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
                if i > 0 {
                    s.push_str("  ");
                }
                s.push_str(cell);
                s.extend(std::iter::repeat_n(' ', w - cell.chars().count()));
            }
            s.trim_end().to_string()
        };
        let mut out = line(self.header.clone());
        out.push('\n');
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        out.push_str(&line(rule.iter().map(String::as_str).collect()));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&line(row.iter().map(String::as_str).collect()));
            out.push('\n');
        }
        out
    }

    pub fn csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are utf-8")
    }
}

fn list<T: AsRef<str>>(items: impl IntoIterator<Item = T>) -> String {
    let joined: Vec<String> = items.into_iter().map(|s| s.as_ref().to_string()).collect();
    if joined.is_empty() {
        "-".into()
    } else {
        joined.join(";")
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn comparison_table(reports: &[Report]) -> Table {
    let mut t = Table::new(vec!["scenario", "mode", "correct", "answer", "tokens", "replans", "submit", "patterns", "strategies"]);
    for r in reports {
        for m in &r.results {
            let row = match &m.outcome {
                Ok(s) => vec![
                    r.scenario.clone(),
                    m.mode.to_string(),
                    if s.correct { "yes" } else { "no" }.into(),
                    one_line(&s.answer),
                    s.tokens.to_string(),
                    s.replans.to_string(),
                    s.reason.as_str().into(),
                    list(s.patterns.iter().map(|p| p.as_str())),
                    list(s.strategies.iter().map(|s| s.as_str())),
                ],
                Err(e) => {
                    let mut row = vec![r.scenario.clone(), m.mode.to_string(), "error".into(), one_line(e)];
                    row.extend(std::iter::repeat_n("-".to_string(), 5));
                    row
                }
            };
            t.push(row);
        }
    }
    t
}

/// Pattern and strategy instances of one session.
#[derive(Clone, Debug, Default)]
pub struct SessionAnalysis {
    pub session: String,
    pub patterns: Vec<PatternInstance>,
    pub strategies: Vec<StrategyInstance>,
}

fn evidence(seqs: &[u64]) -> String {
    seqs.iter().map(u64::to_string).collect::<Vec<_>>().join(" ")
}

fn confidence(low: bool) -> String {
    if low { "low" } else { "high" }.into()
}

pub fn instances_table(sessions: &[SessionAnalysis]) -> Table {
    let mut t = Table::new(vec!["session", "category", "name", "evidence", "confidence", "items"]);
    for s in sessions {
        for p in &s.patterns {
            t.push(vec![
                s.session.clone(),
                "pattern".into(),
                p.pattern.as_str().into(),
                evidence(&p.evidence),
                confidence(p.low_confidence),
                "-".into(),
            ]);
        }
        for x in &s.strategies {
            t.push(vec![
                s.session.clone(),
                "strategy".into(),
                x.strategy.as_str().into(),
                evidence(&x.evidence),
                confidence(x.low_confidence),
                list(&x.items),
            ]);
        }
    }
    t
}

pub fn usage_table(sessions: &[(String, Mode, UsageReport)]) -> Table {
    let mut t = Table::new(vec!["session", "mode", "agent", "prompt_tokens", "completion_tokens", "total"]);
    for (session, mode, u) in sessions {
        let rows = u.per_agent.iter().map(|(a, t)| (a.as_str(), t)).chain(std::iter::once(("(all)", &u.total)));
        for (agent, usage) in rows {
            t.push(vec![
                session.clone(),
                mode.to_string(),
                agent.into(),
                usage.prompt_tokens.to_string(),
                usage.completion_tokens.to_string(),
                usage.total().to_string(),
            ]);
        }
    }
    t
}

pub fn cdf_table(curves: &BTreeMap<Mode, Vec<CdfPoint>>) -> Table {
    let mut t = Table::new(vec!["mode", "tokens", "fraction"]);
    for (mode, curve) in curves {
        for p in curve {
            t.push(vec![mode.to_string(), p.tokens.to_string(), format!("{:.4}", p.fraction)]);
        }
    }
    t
}
