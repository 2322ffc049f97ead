//! Role toolkits.
//!
//! Every agent has the two communication tools. Domain tools depend on the
//! role, and only the orchestrator can submit a final answer.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::Role;

pub const SEND_MESSAGE: &str = "send_message";
pub const WAIT_FOR_MENTION: &str = "wait_for_mention";
pub const SUBMIT_ANSWER: &str = "submit_answer";

pub const SEARCH_GOOGLE: &str = "search_google";
pub const SEARCH_WIKI_REVISIONS: &str = "search_wiki_revisions";
pub const SEARCH_WIKI: &str = "search_wiki";
pub const SEARCH_ARCHIVED_WEBPAGE: &str = "search_archived_webpage";
pub const BROWSE_URL: &str = "browse_url";
pub const EXTRACT_DOCUMENT_CONTENT: &str = "extract_document_content";
pub const ASK_QUESTION_ABOUT_VIDEO: &str = "ask_question_about_video";
pub const ASK_QUESTION_ABOUT_IMAGE: &str = "ask_question_about_image";
pub const ASK_QUESTION_ABOUT_AUDIO: &str = "ask_question_about_audio";
pub const EXECUTE_CODE: &str = "execute_code";
pub const EXTRACT_EXCEL_CONTENT: &str = "extract_excel_content";

pub const COMMUNICATION_TOOLS: [&str; 2] = [SEND_MESSAGE, WAIT_FOR_MENTION];

const WEB_TOOLS: [&str; 7] = [
    SEARCH_GOOGLE,
    SEARCH_WIKI_REVISIONS,
    SEARCH_WIKI,
    SEARCH_ARCHIVED_WEBPAGE,
    BROWSE_URL,
    EXTRACT_DOCUMENT_CONTENT,
    ASK_QUESTION_ABOUT_VIDEO,
];
const DOCUMENT_TOOLS: [&str; 5] = [
    EXTRACT_DOCUMENT_CONTENT,
    ASK_QUESTION_ABOUT_IMAGE,
    ASK_QUESTION_ABOUT_AUDIO,
    ASK_QUESTION_ABOUT_VIDEO,
    EXECUTE_CODE,
];
const REASONING_TOOLS: [&str; 3] = [EXECUTE_CODE, EXTRACT_EXCEL_CONTENT, EXTRACT_DOCUMENT_CONTENT];

/// Every domain and auxiliary tool name known to the registry.
pub fn all_tool_names() -> BTreeSet<&'static str> {
    WEB_TOOLS.iter().chain(&DOCUMENT_TOOLS).chain(&REASONING_TOOLS).chain(&[SUBMIT_ANSWER]).copied().collect()
}

/// Domain and auxiliary tools of one role. Communication tools are implied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolSet {
    pub role: Role,
    pub tools: BTreeSet<String>,
}

impl ToolSet {
    pub fn contains(&self, tool: &str) -> bool {
        self.tools.contains(tool)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownRole;

impl core::error::Error for UnknownRole {}

impl fmt::Display for UnknownRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("role has no default toolkit")
    }
}

pub fn lookup_toolkit(role: Role) -> Result<ToolSet, UnknownRole> {
    let tools: &[&str] = match role {
        Role::Orchestrator => &[SUBMIT_ANSWER],
        Role::Planner => &[],
        Role::Web => &WEB_TOOLS,
        Role::Document => &DOCUMENT_TOOLS,
        Role::ReasoningCoding => &REASONING_TOOLS,
        Role::Custom => return Err(UnknownRole),
    };
    Ok(ToolSet { role, tools: tools.iter().map(|t| t.to_string()).collect() })
}

/// Output of a tool invocation, the optional intermediate result a worker
/// folds into its response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolResult {
    pub tool: String,
    pub output: String,
    pub ok: bool,
}

impl ToolResult {
    pub fn ok(tool: impl Into<String>, output: impl Into<String>) -> Self {
        Self { tool: tool.into(), output: output.into(), ok: true }
    }

    /// A failed invocation; `error` must describe what went wrong.
    pub fn error(tool: impl Into<String>, error: impl Into<String>) -> Self {
        let mut output: String = error.into();
        if output.trim().is_empty() {
            output = "tool error".into();
        }
        Self { tool: tool.into(), output, ok: false }
    }
}
