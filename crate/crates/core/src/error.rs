use thiserror::Error;

/// Errors raised by the probability primitives, solvers and sequential tests.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("cannot construct distribution: {0}")]
    Construction(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("argument outside its domain: {0}")]
    Domain(String),
    #[error("empirical distribution of an empty sequence")]
    EmptySequence,
    #[error("infeasible problem: {0}")]
    Infeasible(String),
    #[error("degenerate game: {0}")]
    DegenerateGame(String),
    #[error("resource limit exceeded: {0}")]
    Resource(String),
    #[error("sequential test has already stopped")]
    AlreadyStopped,
    #[error("symbol stream exhausted after {0} samples")]
    StreamExhausted(u64),
}

pub type Result<T> = std::result::Result<T, Error>;
