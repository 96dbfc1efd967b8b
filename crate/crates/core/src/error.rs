use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid economy: {0}")]
    InvalidEconomy(String),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("unknown room {0:?}")]
    UnknownRoom(String),
    #[error("unknown agent {0:?}")]
    UnknownAgent(String),
    #[error("allocation is not envy-free: agent {agent} envies agent {envied}")]
    NotEnvyFree { agent: usize, envied: usize },
    #[error("no perfect matching exists among the permitted edges")]
    NoPerfectMatching,
    #[error("malformed linear program: {0}")]
    MalformedLp(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
