use thiserror::Error;

/// Errors produced by the solvers, flows and experiment runners.
#[derive(Debug, Error)]
pub enum Error {
    /// A numeric argument is outside its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A configuration is structurally well formed but has no defined
    /// semantics (e.g. a Legendre value requested for a non-Bregman setup).
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    /// An evaluation point lies outside the domain of the requested geometry.
    #[error("domain violation: {0}")]
    DomainViolation(String),

    /// A stated precondition on the inputs does not hold.
    #[error("precondition violation: {0}")]
    PreconditionViolation(String),

    /// Vector or matrix dimensions do not line up.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The adaptive quadrature hit its maximum refinement depth. The partial
    /// estimate is the best value accumulated before giving up.
    #[error("quadrature did not converge (partial estimate {partial})")]
    IntegrationFailure { partial: f64 },

    /// A flow produced a non-finite loss; `step` is the first bad step.
    #[error("flow diverged at step {step} with loss {loss}")]
    Divergence { step: u64, loss: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
