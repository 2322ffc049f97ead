//! Threaded runtime for the information-flow orchestrator: message bus,
//! agent loops, decision backends, tool stubs, traces, scenarios, replay and
//! comparison reports.

pub mod backend;
pub mod bus;
pub mod compare;
pub mod config;
pub mod error;
pub mod orchestrator;
pub mod replay;
pub mod report;
pub mod scenario;
pub mod session;
pub mod synthetic;
pub mod tools;
pub mod trace;
pub mod worker;
pub mod workflow;

pub use infoflow_core as core;

pub use error::RunError;
pub use session::{run_session, AgentFactory, ScriptedFactory, SessionInput, SessionOutcome, Settings};
