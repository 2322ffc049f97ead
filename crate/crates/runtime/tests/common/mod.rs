//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use infoflow_runtime::compare::{resolve_target, run_mode, RunOptions};
use infoflow_runtime::core::trace::{Mode, TraceEvent};
use infoflow_runtime::trace::read_trace;
use serde::Deserialize;

pub fn manifest_dir() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

pub fn corpus_dir() -> PathBuf {
    manifest_dir().join("tests/corpus")
}

#[derive(Debug, Deserialize)]
pub struct Labeled {
    pub source: String,
    pub patterns: BTreeSet<String>,
    pub strategies: BTreeSet<String>,
}

#[derive(Deserialize)]
struct LabelsFile {
    trace: Vec<Labeled>,
}

pub fn corpus_labels() -> Vec<Labeled> {
    let text = std::fs::read_to_string(corpus_dir().join("labels.toml")).expect("labels.toml");
    toml::from_str::<LabelsFile>(&text).expect("labels.toml parses").trace
}

impl Labeled {
    /// File name of the stored trace: the source with path and punctuation flattened.
    pub fn trace_path(&self) -> PathBuf {
        let stem = Path::new(&self.source).file_stem().and_then(|s| s.to_str()).unwrap_or(&self.source);
        corpus_dir().join("traces").join(format!("{}.jsonl", stem.replace(':', "-")))
    }

    pub fn stored(&self) -> Vec<TraceEvent> {
        let path = self.trace_path();
        read_trace(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
    }

    /// A fresh a2a run of the source with seed 0.
    pub fn regenerate(&self) -> Vec<TraceEvent> {
        let target = if self.source.ends_with(".scn") {
            corpus_dir().join(&self.source).to_string_lossy().into_owned()
        } else {
            self.source.clone()
        };
        let scenario = resolve_target(&target, 0).unwrap_or_else(|e| panic!("{e}")).remove(0);
        run_mode(&scenario, Mode::A2a, 0, &RunOptions::default())
            .unwrap_or_else(|e| panic!("{}: {e}", self.source))
            .events
    }
}
