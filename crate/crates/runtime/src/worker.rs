//! Worker agent loop: wait for a mention, optionally call tools, answer the
//! orchestrator.

use std::time::Duration;

use infoflow_core::planner::{count_tasks_blocks, lint_subtasks, parse_tasks, MentionKind};
use infoflow_core::script::{assemble_context, Segment, DEFAULT_SEGMENT_BUDGET};
use infoflow_core::toolkit::all_tool_names;
use infoflow_core::trace::{EventKind, Payload};
use infoflow_core::{AgentId, Message, MessageKind, Role, ToolCall, ToolResult, ToolSet, WorkerReport};
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, Completion};
use crate::bus::{BusError, Handle};
use crate::error::RunError;
use crate::tools::ToolBox;

pub const DEFAULT_MAX_TOOL_STEPS: usize = 3;

/// Which transcript a worker's decision function sees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViewMode {
    /// Only messages the worker sent or received.
    #[default]
    PerAgent,
    Global,
}

impl ViewMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViewMode::PerAgent => "per-agent",
            ViewMode::Global => "global",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "per-agent" => Some(ViewMode::PerAgent),
            "global" => Some(ViewMode::Global),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WorkerConfig {
    pub role: Role,
    pub prompt: String,
    pub format_note: Option<String>,
    pub segment_budget: usize,
    pub view: ViewMode,
    /// Wait slice between checks for a closed bus.
    pub poll: Duration,
    pub toolset: ToolSet,
    pub max_tool_steps: usize,
}

impl WorkerConfig {
    pub fn new(role: Role, prompt: impl Into<String>, toolset: ToolSet) -> Self {
        Self {
            role,
            prompt: prompt.into(),
            format_note: None,
            segment_budget: DEFAULT_SEGMENT_BUDGET,
            view: ViewMode::PerAgent,
            poll: Duration::from_millis(250),
            toolset,
            max_tool_steps: DEFAULT_MAX_TOOL_STEPS,
        }
    }
}

/// Final reply to one mention.
enum Reply {
    Completed(Completion),
    Synthetic(WorkerReport),
}

struct Worker<'a> {
    handle: &'a Handle,
    backend: &'a mut dyn Backend,
    tools: &'a mut dyn ToolBox,
    cfg: &'a WorkerConfig,
    me: AgentId,
}

/// Serves mentions until the bus closes.
pub fn run_worker(
    handle: &Handle,
    backend: &mut dyn Backend,
    tools: &mut dyn ToolBox,
    cfg: &WorkerConfig,
) -> Result<(), RunError> {
    let me = handle.agent().clone();
    let mut w = Worker { handle, backend, tools, cfg, me };
    loop {
        match handle.wait_for_mention(cfg.poll) {
            Ok(m) => match w.serve(&m) {
                Ok(()) | Err(RunError::Bus(BusError::Closed)) => {}
                Err(e) => return Err(e),
            },
            Err(BusError::WaitTimeout(_)) => continue,
            Err(BusError::Closed) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}

impl Worker<'_> {
    fn emit(&self, kind: EventKind, payload: Payload, tokens: u64) {
        self.handle.bus().tracer().emit(kind, payload, tokens);
    }

    fn payload(&self) -> Payload {
        Payload { agent: Some(self.me.to_string()), ..Payload::default() }
    }

    fn view(&self) -> Vec<Segment> {
        let bus = self.handle.bus();
        let messages = match self.cfg.view {
            ViewMode::PerAgent => bus.view_for(&self.me),
            ViewMode::Global => bus.history().messages().to_vec(),
        };
        messages.iter().map(|m| Segment::from_message(m, &self.me)).collect()
    }

    fn serve(&mut self, mention: &Message) -> Result<(), RunError> {
        let mut view = self.view();
        let reply = self.reply(&mut view)?;
        let orchestrator = self.handle.bus().roster().orchestrator().clone();

        let (content, completion, usage) = match reply {
            Reply::Completed(c) => (c.text.clone(), Some(c.text), Some(c.usage)),
            Reply::Synthetic(r) => (r.render(), None, None),
        };
        let report = WorkerReport::parse(&content);
        if let Err(e) = &report {
            self.emit(EventKind::Warning, Payload { detail: Some(e.to_string()), ..self.payload() }, 0);
        }
        let report = report.ok().flatten();
        let kind = match &report {
            Some(r) => r.message_kind(),
            None if content.contains("<tasks>") => MessageKind::Decomposition,
            None => MessageKind::Response,
        };
        if self.cfg.role == Role::Planner {
            self.lint(&content);
        }
        self.emit(
            EventKind::Respond,
            Payload {
                recipient: Some(orchestrator.to_string()),
                turn: Some(mention.turn),
                msg_kind: Some(kind),
                status: report.as_ref().map(|r| r.status),
                notes: report.and_then(|r| r.notes),
                completion,
                prompt_tokens: usage.map(|u| u.prompt_tokens),
                completion_tokens: usage.map(|u| u.completion_tokens),
                usage_source: usage.map(|u| u.source),
                ..self.payload()
            },
            usage.map_or(0, |u| u.total()),
        );
        self.handle.send(&orchestrator, &content, kind, mention.turn)?;
        Ok(())
    }

    fn reply(&mut self, view: &mut Vec<Segment>) -> Result<Reply, RunError> {
        let mut steps = 0;
        loop {
            let ctx = assemble_context(&self.cfg.prompt, self.cfg.format_note.as_deref(), view, self.cfg.segment_budget);
            let c = match self.backend.complete(&ctx) {
                Ok(c) => c,
                Err(BackendError::Replay(why)) => {
                    return Err(RunError::Backend { agent: self.me.to_string(), source: BackendError::Replay(why) })
                }
                Err(e) => {
                    let label = match e {
                        BackendError::ScriptGap(_) => "script_gap",
                        _ => "backend_failure",
                    };
                    self.emit(
                        EventKind::Warning,
                        Payload { error: Some(label.into()), detail: Some(e.to_string()), ..self.payload() },
                        0,
                    );
                    return Ok(Reply::Synthetic(WorkerReport::failed(
                        "I could not produce a result for this request.",
                        match label {
                            "script_gap" => "no scripted behavior for this request",
                            _ => "decision backend unavailable",
                        },
                    )));
                }
            };
            let Some(call) = ToolCall::parse(&c.text) else { return Ok(Reply::Completed(c)) };
            self.emit(
                EventKind::ToolInvoke,
                Payload {
                    tool: Some(call.tool.clone()),
                    args: Some(call.args.clone()),
                    completion: Some(c.text.clone()),
                    prompt_tokens: Some(c.usage.prompt_tokens),
                    completion_tokens: Some(c.usage.completion_tokens),
                    usage_source: Some(c.usage.source),
                    ..self.payload()
                },
                c.usage.total(),
            );
            if steps == self.cfg.max_tool_steps {
                return Ok(Reply::Synthetic(WorkerReport::failed(
                    "I ran out of tool steps before reaching a result.",
                    "tool step limit reached",
                )));
            }
            steps += 1;
            if !self.cfg.toolset.contains(&call.tool) {
                let notes = format!("tool unavailable: {}", call.tool);
                self.emit(
                    EventKind::ToolResult,
                    Payload {
                        tool: Some(call.tool.clone()),
                        ok: Some(false),
                        error: Some("unknown_tool".into()),
                        output: Some(notes.clone()),
                        ..self.payload()
                    },
                    0,
                );
                return Ok(Reply::Synthetic(WorkerReport::failed(
                    format!("The {} tool is not available to me.", call.tool),
                    notes,
                )));
            }
            let result: ToolResult = self.tools.call(&call.tool, &call.args);
            self.emit(
                EventKind::ToolResult,
                Payload {
                    tool: Some(result.tool.clone()),
                    ok: Some(result.ok),
                    output: Some(result.output.clone()),
                    ..self.payload()
                },
                0,
            );
            view.push(Segment::tool_result(&result));
        }
    }

    /// Advisory checks on planner output; findings become warnings.
    fn lint(&self, content: &str) {
        if count_tasks_blocks(content) > 1 {
            self.emit(
                EventKind::Warning,
                Payload { detail: Some("more than one <tasks> block; only the first is used".into()), ..self.payload() },
                0,
            );
        }
        let Ok(list) = parse_tasks(content) else { return };
        let roster = self.handle.bus().roster();
        let agents: Vec<&str> = roster.entries().iter().map(|e| e.name.as_str()).collect();
        let tools: Vec<&str> = all_tool_names().into_iter().collect();
        for v in lint_subtasks(&list, agents.iter().copied(), tools.iter().copied()) {
            let what = match v.kind {
                MentionKind::Agent => "agent",
                MentionKind::Tool => "tool",
            };
            self.emit(
                EventKind::Warning,
                Payload {
                    error: Some("plan_lint".into()),
                    subtask: Some(v.subtask),
                    detail: Some(format!("subtask {} mentions {what} {}", v.subtask, v.term)),
                    ..self.payload()
                },
                0,
            );
        }
    }
}
