use thiserror::Error;

/// Errors produced by model construction, solvers, and simulation.
#[derive(Debug, Error)]
pub enum Error {
    /// A distribution or system parameter is outside its legal range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A distribution definition violates its invariants.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    /// A state lookup or index was outside the enumerated space.
    #[error("state space error: {0}")]
    StateSpace(String),

    /// A linear solve or iteration failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A model was used before a required component was installed.
    #[error("model incomplete: {0}")]
    Incomplete(String),
}

pub type Result<T> = std::result::Result<T, Error>;
