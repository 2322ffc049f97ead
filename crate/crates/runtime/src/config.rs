//! Run configuration file (TOML).
//!
//! ```toml
//! [session]
//! budget = "30m"
//! wait_timeout = "120s"
//! view = "per-agent"
//! segment_budget = 64
//! max_replans = 3
//!
//! [[roster]]
//! name = "information_flow_orchestrator"
//! role = "orchestrator"
//!
//! [prompts]
//! orchestrator = "prompts/orchestrator.txt"
//!
//! [remote]
//! endpoint = "http://localhost:8000/v1/chat/completions"
//! model = "gpt-4.1"
//! api_key_env = "OPENAI_API_KEY"
//! ```
//!
//! Every section is optional. Prompt paths are relative to the config file.
//! A roster given here replaces the scenario's roster.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use infoflow_core::model::RosterEntry;
use infoflow_core::{AgentRoster, Role};
use serde::Deserialize;

use crate::backend::RemoteConfig;
use crate::session::Settings;
use crate::worker::ViewMode;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionSection {
    #[serde(default, with = "opt_duration")]
    budget: Option<Duration>,
    #[serde(default, with = "opt_duration")]
    wait_timeout: Option<Duration>,
    #[serde(default, with = "opt_duration")]
    worker_poll: Option<Duration>,
    view: Option<ViewMode>,
    segment_budget: Option<usize>,
    max_replans: Option<u32>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    #[serde(default)]
    session: SessionSection,
    #[serde(default)]
    roster: Option<Vec<RosterEntry>>,
    #[serde(default)]
    prompts: BTreeMap<String, PathBuf>,
    #[serde(default)]
    remote: Option<RemoteConfig>,
}

mod opt_duration {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer};

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Duration>, D::Error> {
        let s: Option<String> = Option::deserialize(d)?;
        s.map(|s| humantime::parse_duration(&s).map_err(serde::de::Error::custom)).transpose()
    }
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    pub budget: Option<Duration>,
    pub wait_timeout: Option<Duration>,
    pub worker_poll: Option<Duration>,
    pub view: Option<ViewMode>,
    pub segment_budget: Option<usize>,
    pub max_replans: Option<u32>,
    pub roster: Option<AgentRoster>,
    pub prompts: BTreeMap<Role, String>,
    pub remote: Option<RemoteConfig>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::parse(&src, path)
    }

    pub fn parse(src: &str, path: &Path) -> Result<Self, ConfigError> {
        let file: FileIn =
            toml::from_str(src).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })?;
        let invalid = |message: String| ConfigError::Invalid { path: path.into(), message };
        let roster = file.roster.map(AgentRoster::new).transpose().map_err(|e| invalid(format!("roster: {e}")))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut prompts = BTreeMap::new();
        for (role, file) in file.prompts {
            let role = Role::parse(&role).ok_or_else(|| invalid(format!("prompts: unknown role {role:?}")))?;
            let full = base.join(&file);
            let text = std::fs::read_to_string(&full).map_err(|source| ConfigError::Io { path: full, source })?;
            prompts.insert(role, text);
        }
        let s = file.session;
        Ok(Self {
            budget: s.budget,
            wait_timeout: s.wait_timeout,
            worker_poll: s.worker_poll,
            view: s.view,
            segment_budget: s.segment_budget,
            max_replans: s.max_replans,
            roster,
            prompts,
            remote: file.remote,
        })
    }

    /// Session settings with this file's values over the defaults.
    pub fn settings(&self) -> Settings {
        let d = Settings::default();
        Settings {
            budget: self.budget.unwrap_or(d.budget),
            wait_timeout: self.wait_timeout.unwrap_or(d.wait_timeout),
            worker_poll: self.worker_poll.unwrap_or(d.worker_poll),
            view: self.view.unwrap_or(d.view),
            segment_budget: self.segment_budget.unwrap_or(d.segment_budget),
            max_replans: self.max_replans.unwrap_or(d.max_replans),
            prompts: self.prompts.clone(),
            ..d
        }
    }
}
