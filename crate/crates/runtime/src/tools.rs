//! Domain tool stubs: fixture lookup tables plus an arithmetic-only
//! `execute_code`.

use std::collections::{BTreeMap, VecDeque};

use infoflow_core::arith::evaluate_to_string;
use infoflow_core::toolkit::EXECUTE_CODE;
use infoflow_core::{ToolResult, ToolSet};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("tool {tool} is not in the {role} toolset")]
pub struct UnknownTool {
    pub tool: String,
    pub role: String,
}

/// One keyed stub record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub tool: String,
    pub args: String,
    pub output: String,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub ok: bool,
}

fn yes() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Fixtures {
    table: BTreeMap<(String, String), (String, bool)>,
}

impl Fixtures {
    pub fn new(records: impl IntoIterator<Item = Fixture>) -> Self {
        let table =
            records.into_iter().map(|f| ((f.tool, f.args.trim().to_string()), (f.output, f.ok))).collect();
        Self { table }
    }

    pub fn get(&self, tool: &str, args: &str) -> Option<ToolResult> {
        self.table.get(&(tool.to_string(), args.trim().to_string())).map(|(output, ok)| ToolResult {
            tool: tool.to_string(),
            output: output.clone(),
            ok: *ok,
        })
    }

    pub fn contains(&self, tool: &str, args: &str) -> bool {
        self.table.contains_key(&(tool.to_string(), args.trim().to_string()))
    }

    pub fn records(&self) -> impl Iterator<Item = Fixture> + '_ {
        self.table.iter().map(|((tool, args), (output, ok))| Fixture {
            tool: tool.clone(),
            args: args.clone(),
            output: output.clone(),
            ok: *ok,
        })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

pub trait ToolBox: Send {
    fn call(&mut self, tool: &str, args: &str) -> ToolResult;
}

/// Fixture-backed stubs. `execute_code` falls back to the arithmetic
/// evaluator when no fixture matches.
#[derive(Clone, Debug, Default)]
pub struct StubTools {
    fixtures: Fixtures,
}

impl StubTools {
    pub fn new(fixtures: Fixtures) -> Self {
        Self { fixtures }
    }
}

impl ToolBox for StubTools {
    fn call(&mut self, tool: &str, args: &str) -> ToolResult {
        if let Some(hit) = self.fixtures.get(tool, args) {
            return hit;
        }
        if tool == EXECUTE_CODE {
            return match evaluate_to_string(args) {
                Ok(v) => ToolResult::ok(tool, v),
                Err(e) => ToolResult::error(tool, format!("execution failed: {e}")),
            };
        }
        ToolResult::error(tool, format!("no result for {tool}({})", args.trim()))
    }
}

/// Plays back recorded tool results in order.
#[derive(Clone, Debug, Default)]
pub struct ReplayTools {
    queue: VecDeque<ToolResult>,
}

impl ReplayTools {
    pub fn new(results: impl IntoIterator<Item = ToolResult>) -> Self {
        Self { queue: results.into_iter().collect() }
    }
}

impl ToolBox for ReplayTools {
    fn call(&mut self, tool: &str, _args: &str) -> ToolResult {
        self.queue.pop_front().unwrap_or_else(|| ToolResult::error(tool, "replay has no recorded result"))
    }
}

/// Checks the toolset, then dispatches to the stub.
pub fn invoke_tool(toolset: &ToolSet, tools: &mut dyn ToolBox, name: &str, args: &str) -> Result<ToolResult, UnknownTool> {
    if !toolset.contains(name) {
        return Err(UnknownTool { tool: name.to_string(), role: toolset.role.to_string() });
    }
    Ok(tools.call(name, args))
}
