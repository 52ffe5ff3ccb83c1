use thiserror::Error;

/// Errors raised by the oscillator toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum IgoError {
    #[error("divided-difference nodes {z0} and {z1} are not separated")]
    DegenerateNodes { z0: f64, z1: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("modulation functions are defined for positive outputs only, got z = {z}")]
    NonPositiveOutput { z: f64 },

    #[error("no sign change of the cycle equation on [{lo}, {hi}]")]
    BracketingFailure { lo: f64, hi: f64 },

    #[error("state is not a fixed point of the impulse-to-impulse map (residual {residual:e} > {tolerance:e})")]
    NotAFixedPoint { residual: f64, tolerance: f64 },

    #[error("spectral radius {r0} is on the unit circle, convergence time undefined")]
    MarginalStability { r0: f64 },

    #[error("{step}: {reason}")]
    Infeasible { step: &'static str, reason: String },

    #[error("no slope pair on the search grid satisfies the Schur conditions")]
    NoStableSlopes,
}

pub type Result<T> = std::result::Result<T, IgoError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> IgoError {
    IgoError::InvalidParameter { name, reason: reason.into() }
}
