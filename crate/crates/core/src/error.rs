use thiserror::Error;

/// Errors raised by solvers, samplers and verifiers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The slope is below the admissible threshold. `sharp` is false when
    /// `k_star` is only a necessary bound (moment-based).
    #[error("infeasible slope k = {k}: {reason} (k* = {k_star:.6})")]
    InfeasibleSlope {
        k: f64,
        k_star: f64,
        sharp: bool,
        reason: String,
    },

    /// The hitting time is (numerically) constant, so no initial law exists.
    #[error("degenerate hitting time: {0}")]
    DegenerateTarget(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("quadrature did not converge: estimated error {achieved:e} exceeds tolerance {requested:e}")]
    Quadrature { achieved: f64, requested: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
