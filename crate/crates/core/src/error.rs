use thiserror::Error;

/// Errors produced by the analytic and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Gram matrix of the estimated channel is too badly conditioned to invert.
    #[error("ill-conditioned Gram matrix (condition number {condition:.3e})")]
    IllConditioned { condition: f64 },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
