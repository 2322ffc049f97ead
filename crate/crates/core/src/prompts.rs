//! Default role prompts, packaged as plain-text resources.

use crate::directive::PromptProfile;
use crate::model::Role;

pub const ORCHESTRATOR: &str = include_str!("../prompts/orchestrator.txt");
pub const PLANNER: &str = include_str!("../prompts/planner.txt");
pub const WEB: &str = include_str!("../prompts/web.txt");
pub const DOCUMENT: &str = include_str!("../prompts/document.txt");
pub const REASONING_CODING: &str = include_str!("../prompts/reasoning_coding.txt");

/// Resource file name (under `prompts/`) for a role.
pub fn resource_name(role: Role) -> Option<&'static str> {
    match role {
        Role::Orchestrator => Some("orchestrator.txt"),
        Role::Planner => Some("planner.txt"),
        Role::Web => Some("web.txt"),
        Role::Document => Some("document.txt"),
        Role::ReasoningCoding => Some("reasoning_coding.txt"),
        Role::Custom => None,
    }
}

pub fn default_prompt_text(role: Role) -> Option<&'static str> {
    match role {
        Role::Orchestrator => Some(ORCHESTRATOR),
        Role::Planner => Some(PLANNER),
        Role::Web => Some(WEB),
        Role::Document => Some(DOCUMENT),
        Role::ReasoningCoding => Some(REASONING_CODING),
        Role::Custom => None,
    }
}

pub fn default_profile(role: Role) -> Option<PromptProfile> {
    default_prompt_text(role).and_then(|text| PromptProfile::new(role.default_agent_name(), text))
}

/// Appended after the role prompt for live models so replies follow the
/// directive and report grammars. Scripted backends never see a difference.
pub const ORCHESTRATOR_FORMAT_NOTE: &str = "Reply with exactly one fenced block:\n```directive\naction: inquiry|instruction|submit\ntarget: <agent name, omitted for submit>\ncontent: <message text or final answer>\n```\nOptional lines before content: `criteria: a; b` for success criteria you are making explicit, `prune: x; y` for items you removed from an earlier result.";

pub const WORKER_FORMAT_NOTE: &str = "To use a tool reply with exactly two lines:\ncall: <tool name>\nargs: <arguments>\nOtherwise reply with your answer followed by a trailer:\n```report\nstatus: complete|partial|failed\nnotes: <what is missing or approximated; required for partial>\n```";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_role_has_a_prompt() {
        for role in Role::ALL {
            assert_eq!(default_prompt_text(role).is_some(), role != Role::Custom);
        }
        assert!(ORCHESTRATOR.contains("submit_answer_tool"));
        assert!(PLANNER.contains("<tasks>"));
    }
}
