//! The asymmetric communication constraint.
//!
//! In star mode an edge `sender -> recipient` is permitted iff one of its
//! endpoints is the orchestrator. The reserved `user` sender may only address
//! the orchestrator.

use serde::{Deserialize, Serialize};

use crate::model::AgentId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyMode {
    #[default]
    Star,
    /// Any distinct pair may talk. Used by tests.
    Unrestricted,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopologyPolicy {
    pub orchestrator: AgentId,
    pub mode: TopologyMode,
}

impl TopologyPolicy {
    pub fn star(orchestrator: AgentId) -> Self {
        Self { orchestrator, mode: TopologyMode::Star }
    }

    pub fn unrestricted(orchestrator: AgentId) -> Self {
        Self { orchestrator, mode: TopologyMode::Unrestricted }
    }

    pub fn permits(&self, sender: &AgentId, recipient: &AgentId) -> bool {
        validate_edge(self, sender, recipient)
    }
}

pub fn validate_edge(policy: &TopologyPolicy, sender: &AgentId, recipient: &AgentId) -> bool {
    if sender.is_user() {
        return *recipient == policy.orchestrator;
    }
    match policy.mode {
        TopologyMode::Star => *sender == policy.orchestrator || *recipient == policy.orchestrator,
        TopologyMode::Unrestricted => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> AgentId {
        AgentId::new(s).unwrap()
    }

    #[test]
    fn star_edges() {
        let p = TopologyPolicy::star(id("O"));
        assert!(validate_edge(&p, &id("O"), &id("web")));
        assert!(validate_edge(&p, &id("web"), &id("O")));
        assert!(!validate_edge(&p, &id("web"), &id("doc")));
        assert!(validate_edge(&p, &AgentId::user(), &id("O")));
        assert!(!validate_edge(&p, &AgentId::user(), &id("web")));
    }

    #[test]
    fn unrestricted_edges() {
        let p = TopologyPolicy::unrestricted(id("O"));
        assert!(validate_edge(&p, &id("web"), &id("doc")));
        assert!(!validate_edge(&p, &AgentId::user(), &id("doc")));
    }
}
