//! Scenario files (`.scn`): TOML documents holding a query, its expected
//! answer, tool fixtures and the scripted policies of every agent.
//!
//! ```toml
//! schema = 1
//! name = "echo"
//! query = "compute 2+2"
//! expected_answer = "4"
//!
//! [[fixtures]]
//! tool = "search_google"
//! args = "survivor winners"
//! output = "..."
//!
//! [[orchestrator]]
//! when = ["[user ->"]
//! reply = "action: instruction\ntarget: reasoning-coding\ncontent: compute 2+2"
//!
//! [[workers.reasoning-coding]]
//! when = ["compute"]
//! unless = ["[tool_result"]
//! reply = "call: execute_code\nargs: 2+2"
//! ```
//!
//! A rule matches when every `when` substring and no `unless` substring
//! occurs in the agent's newest observation. The first matching rule wins.
//! One worker table per role serves both modes.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use infoflow_core::arith::evaluate;
use infoflow_core::model::RosterEntry;
use infoflow_core::script::{Pattern, Rule, Script, OBSERVATION_PLACEHOLDER};
use infoflow_core::toolkit::EXECUTE_CODE;
use infoflow_core::{lookup_toolkit, parse_directive, AgentRoster, Role, ToolCall};
use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::tools::{Fixture, Fixtures};

pub const SCHEMA_VERSION: u32 = 1;
pub const EXTENSION: &str = "scn";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    None,
    Partial,
    Failed,
}

impl FailureKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(FailureKind::None),
            "partial" => Some(FailureKind::Partial),
            "failed" => Some(FailureKind::Failed),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureInjection {
    pub subtask: usize,
    pub kind: FailureKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub description: Option<String>,
    pub query: String,
    pub expected_answer: String,
    pub roster: AgentRoster,
    pub fixtures: Fixtures,
    pub orchestrator: Script,
    pub workers: BTreeMap<Role, Script>,
    pub failure_injection: Option<FailureInjection>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SchemaError {
    pub path: String,
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path)?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
        }
        write!(f, ": {}: {}", self.field, self.message)
    }
}

impl std::error::Error for SchemaError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    schema: Spanned<u32>,
    name: Spanned<String>,
    #[serde(default)]
    description: Option<String>,
    query: Spanned<String>,
    expected_answer: Spanned<String>,
    #[serde(default)]
    roster: Option<Spanned<Vec<RosterEntry>>>,
    #[serde(default)]
    failure_injection: Option<FailureInjection>,
    #[serde(default)]
    fixtures: Vec<Fixture>,
    orchestrator: Vec<RuleIn>,
    #[serde(default)]
    workers: BTreeMap<String, Spanned<Vec<RuleIn>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleIn {
    #[serde(default)]
    when: Vec<String>,
    #[serde(default)]
    unless: Vec<String>,
    reply: Spanned<String>,
}

#[derive(Serialize)]
struct FileOut<'a> {
    schema: u32,
    name: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<&'a str>,
    query: &'a str,
    expected_answer: &'a str,
    roster: &'a [RosterEntry],
    #[serde(skip_serializing_if = "Option::is_none")]
    failure_injection: Option<FailureInjection>,
    fixtures: Vec<Fixture>,
    orchestrator: Vec<RuleOut<'a>>,
    workers: BTreeMap<&'static str, Vec<RuleOut<'a>>>,
}

#[derive(Serialize)]
struct RuleOut<'a> {
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    when: &'a [String],
    #[serde(skip_serializing_if = "<[String]>::is_empty")]
    unless: &'a [String],
    reply: &'a str,
}

fn rules_out(script: &Script) -> Vec<RuleOut<'_>> {
    script.rules.iter().map(|r| RuleOut { when: &r.when.all, unless: &r.when.none, reply: &r.reply }).collect()
}

struct Ctx<'a> {
    path: &'a str,
    src: &'a str,
}

impl Ctx<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.src[..span.start.min(self.src.len())].matches('\n').count() + 1
    }

    fn err(&self, span: Option<Range<usize>>, field: impl Into<String>, message: impl Into<String>) -> SchemaError {
        SchemaError {
            path: self.path.to_string(),
            line: span.map(|s| self.line(s)),
            field: field.into(),
            message: message.into(),
        }
    }
}

fn non_empty(ctx: &Ctx<'_>, v: Spanned<String>, field: &str) -> Result<String, SchemaError> {
    if v.get_ref().trim().is_empty() {
        return Err(ctx.err(Some(v.span()), field, "must not be empty"));
    }
    Ok(v.into_inner())
}

fn script_of(rules: Vec<RuleIn>) -> (Script, Vec<Range<usize>>) {
    let spans = rules.iter().map(|r| r.reply.span()).collect();
    let rules = rules
        .into_iter()
        .map(|r| Rule::new(Pattern { all: r.when, none: r.unless }, r.reply.into_inner()))
        .collect();
    (Script::new(rules), spans)
}

pub fn parse_scenario(src: &str, path: &str) -> Result<Scenario, SchemaError> {
    let ctx = Ctx { path, src };
    let file: FileIn = toml::from_str(src).map_err(|e| {
        let field = e.message().split('`').nth(1).unwrap_or("document").to_string();
        ctx.err(e.span(), field, e.message().trim().to_string())
    })?;

    if *file.schema.get_ref() != SCHEMA_VERSION {
        return Err(ctx.err(Some(file.schema.span()), "schema", format!("unsupported version, expected {SCHEMA_VERSION}")));
    }
    let name = non_empty(&ctx, file.name, "name")?;
    let query = non_empty(&ctx, file.query, "query")?;
    let expected_answer = non_empty(&ctx, file.expected_answer, "expected_answer")?;

    let roster = match file.roster {
        None => AgentRoster::standard(),
        Some(r) => {
            let span = r.span();
            AgentRoster::new(r.into_inner()).map_err(|e| ctx.err(Some(span), "roster", e.to_string()))?
        }
    };
    let fixtures = Fixtures::new(file.fixtures);

    let (orchestrator, orch_spans) = script_of(file.orchestrator);
    if orchestrator.rules.is_empty() {
        return Err(ctx.err(None, "orchestrator", "at least one rule is required"));
    }
    for (i, (rule, span)) in orchestrator.rules.iter().zip(orch_spans).enumerate() {
        if let Err(e) = parse_directive(&rule.reply) {
            return Err(ctx.err(Some(span), format!("orchestrator[{i}].reply"), e.to_string()));
        }
    }

    let mut workers = BTreeMap::new();
    for (key, rules) in file.workers {
        let span = rules.span();
        let role = Role::parse(&key)
            .filter(|r| !matches!(r, Role::Orchestrator | Role::Custom))
            .ok_or_else(|| ctx.err(Some(span.clone()), format!("workers.{key}"), "not a worker role"))?;
        if roster.agent_for(role).is_none() {
            return Err(ctx.err(Some(span), format!("workers.{key}"), "role has no agent in the roster"));
        }
        let (script, spans) = script_of(rules.into_inner());
        let toolset = lookup_toolkit(role).map_err(|e| ctx.err(None, format!("workers.{key}"), e.to_string()))?;
        for (i, (rule, span)) in script.rules.iter().zip(spans).enumerate() {
            let Some(call) = ToolCall::parse(&rule.reply) else { continue };
            if !toolset.contains(&call.tool) {
                // answered by the worker runtime with a failed report
                continue;
            }
            let field = format!("workers.{key}[{i}].reply");
            if call.tool == EXECUTE_CODE && (call.args.contains(OBSERVATION_PLACEHOLDER) || evaluate(&call.args).is_ok())
            {
                continue;
            }
            if call.args.contains(OBSERVATION_PLACEHOLDER) {
                return Err(ctx.err(Some(span), field, "tool arguments cannot depend on the observation"));
            }
            if !fixtures.contains(&call.tool, &call.args) {
                return Err(ctx.err(
                    Some(span),
                    field,
                    format!("no fixture for {}({})", call.tool, call.args.trim()),
                ));
            }
        }
        workers.insert(role, script);
    }

    Ok(Scenario {
        name,
        description: file.description,
        query,
        expected_answer,
        roster,
        fixtures,
        orchestrator,
        workers,
        failure_injection: file.failure_injection,
    })
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, LoadError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let src = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: shown.clone(), source })?;
    Ok(parse_scenario(&src, &shown)?)
}

/// Scenario files in a directory, sorted by name.
pub fn scenario_files(dir: impl AsRef<Path>) -> std::io::Result<Vec<std::path::PathBuf>> {
    let mut out: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == EXTENSION))
        .collect();
    out.sort();
    Ok(out)
}

/// Scenarios shipped with the crate: the three case studies, the echo
/// smoke test and a task that keeps failing on the web.
pub const PACKAGED: [(&str, &str); 5] = [
    ("albums", include_str!("../scenarios/albums.scn")),
    ("echo", include_str!("../scenarios/echo.scn")),
    ("reading_rate", include_str!("../scenarios/reading_rate.scn")),
    ("stubborn", include_str!("../scenarios/stubborn.scn")),
    ("survivor", include_str!("../scenarios/survivor.scn")),
];

pub fn packaged(name: &str) -> Option<Result<Scenario, SchemaError>> {
    PACKAGED
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, src)| parse_scenario(src, &format!("{n}.{EXTENSION}")))
}

impl Scenario {
    pub fn script_for(&self, role: Role) -> Script {
        self.workers.get(&role).cloned().unwrap_or_default()
    }

    pub fn to_toml(&self) -> String {
        let out = FileOut {
            schema: SCHEMA_VERSION,
            name: &self.name,
            description: self.description.as_deref(),
            query: &self.query,
            expected_answer: &self.expected_answer,
            roster: self.roster.entries(),
            failure_injection: self.failure_injection,
            fixtures: self.fixtures.records().collect(),
            orchestrator: rules_out(&self.orchestrator),
            workers: self.workers.iter().map(|(r, s)| (r.as_str(), rules_out(s))).collect(),
        };
        toml::to_string(&out).expect("scenario serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ECHO: &str = r#"
schema = 1
name = "echo"
query = "compute 2+2"
expected_answer = "4"

[[orchestrator]]
when = ["[user ->"]
reply = "action: instruction\ntarget: reasoning-coding\ncontent: compute 2+2"

[[workers.reasoning-coding]]
when = ["compute"]
reply = "call: search_google\nargs: nothing"
"#;

    #[test]
    fn loads_and_round_trips() {
        let s = parse_scenario(ECHO, "echo.scn").unwrap();
        assert_eq!(s.name, "echo");
        assert_eq!(s.roster, AgentRoster::standard());
        assert_eq!(s.script_for(Role::ReasoningCoding).rules.len(), 1);
        assert_eq!(parse_scenario(&s.to_toml(), "again").unwrap(), s);
    }

    #[test]
    fn fixture_gap_names_the_line() {
        let src = ECHO.replace("[[workers.reasoning-coding]]", "[[workers.web]]");
        let err = parse_scenario(&src, "gap.scn").unwrap_err();
        assert_eq!(err.field, "workers.web[0].reply");
        assert_eq!(err.line, Some(13));
        assert!(err.message.contains("no fixture for search_google(nothing)"), "{err}");
    }

    #[test]
    fn packaged_scenarios_load() {
        for (name, _) in PACKAGED {
            let s = packaged(name).unwrap().unwrap_or_else(|e| panic!("{e}"));
            assert_eq!(s.name, name);
        }
        assert!(packaged("missing").is_none());
    }

    #[test]
    fn schema_errors() {
        let err = parse_scenario(&ECHO.replace("schema = 1", "schema = 2"), "x").unwrap_err();
        assert_eq!((err.field.as_str(), err.line), ("schema", Some(2)));
        let err = parse_scenario(&ECHO.replace("expected_answer = \"4\"", "expected_answer = \" \""), "x").unwrap_err();
        assert_eq!(err.field, "expected_answer");
        let err = parse_scenario(&ECHO.replace("query = \"compute 2+2\"\n", ""), "x").unwrap_err();
        assert!(err.message.contains("query"), "{err}");
        let err = parse_scenario(&ECHO.replace("target: reasoning-coding\\n", ""), "x").unwrap_err();
        assert_eq!(err.field, "orchestrator[0].reply");
        assert!(err.to_string().starts_with("x:9: "), "{err}");
    }
}
