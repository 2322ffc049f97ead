//! Core of an information-flow-orchestrated multi-agent runtime.
//!
//! One orchestrator agent steers a roster of worker agents purely through
//! natural-language messages sent over a star topology. This crate holds
//! everything that does not need an operating system:
//!
//! - the message, history and session model ([`model`]),
//! - the star-topology edge predicate ([`topology`]),
//! - the orchestrator directive grammar and submission records ([`directive`]),
//! - the worker report trailer and tool-call grammar ([`report`]),
//! - the planner `<tasks>` format and its linter ([`planner`]),
//! - the role toolkits and role prompts ([`toolkit`], [`prompts`]),
//! - scripted decision policies ([`script`]),
//! - workflow-baseline state machines ([`workflow`]),
//! - the trace schema and trace analysis ([`trace`], [`analysis`]).
//!
//! Threads, mailboxes, files and HTTP live in the `infoflow-runtime` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod arith;
pub mod directive;
pub mod model;
pub mod planner;
pub mod prompts;
pub mod report;
pub mod script;
pub mod text;
pub mod toolkit;
pub mod topology;
pub mod trace;
pub mod workflow;

pub use directive::{
    enforce_budget, parse_directive, BudgetStatus, Directive, DirectiveAction, DirectiveError,
    PromptProfile, SubmissionRecord, SubmitReason, UNRESOLVED,
};
pub use model::{
    estimate_tokens, AgentId, AgentRoster, History, Message, MessageId, MessageKind, Role,
    Session, SessionError, TokenUsage, UsageSource, USER,
};
pub use planner::{lint_subtasks, parse_tasks, render_tasks, Subtask, SubtaskList, TasksError};
pub use report::{ReportStatus, ToolCall, WorkerReport};
pub use toolkit::{lookup_toolkit, ToolResult, ToolSet};
pub use topology::{validate_edge, TopologyMode, TopologyPolicy};
pub use trace::{EventKind, Mode, Payload, TraceEvent};
