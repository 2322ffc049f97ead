use crate::backend::BackendError;
use crate::bus::BusError;

/// Failure of one session run.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{agent}: {source}")]
    Backend { agent: String, source: BackendError },
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("roster has no planner to fall back on")]
    NoFallbackTarget,
    #[error("roster has no agent for role {0}")]
    MissingRole(String),
    #[error("worker {agent} stopped: {message}")]
    Worker { agent: String, message: String },
    #[error("trace sink failed: {0}")]
    Trace(String),
    #[error("invalid session setup: {0}")]
    Setup(String),
    #[error("internal error: {0}")]
    Internal(String),
}
