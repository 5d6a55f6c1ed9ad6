//! Error types shared by every solver module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Input fails a structural or numerical validation check.
    #[error("validation: {0}")]
    Validation(String),

    /// A quantity left its mathematical domain (e.g. nonpositive capital).
    #[error("domain: {0}")]
    Domain(String),

    /// An iterative procedure hit its cap without meeting its tolerance.
    /// Carries the last residual so partial progress is visible.
    #[error("{what} did not converge within {iterations} iterations (last residual {residual:e})")]
    NonConvergence {
        what: String,
        residual: f64,
        iterations: usize,
    },

    /// A root or price bracket could not be established or was lost.
    #[error("bracket: {0}")]
    Bracket(String),

    /// A monotone object could not be constructed from the given data.
    #[error("construction: {0}")]
    Construction(String),

    /// No feasible resource allocation exists for the requested point.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A linear system was numerically singular.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
