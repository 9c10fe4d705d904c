use thiserror::Error;

/// Errors raised by the solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time step {dt:e} exceeds the stability bound {bound:e} (limited by {limiting})")]
    Unstable { dt: f64, bound: f64, limiting: &'static str },

    #[error("non-finite state detected at step {step}")]
    NonFinite { step: usize },

    #[error("density went negative ({value:e}) at step {step}")]
    NegativeDensity { step: usize, value: f64 },

    #[error("grid resolves wavenumber {k_nyquist:e} but the truncated Breit-Fermi expansion is only valid below 1/lambda_C = {k_limit:e}")]
    ExpansionInvalid { k_nyquist: f64, k_limit: f64 },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("no convergence after {steps} steps (last residual {residual:e})")]
    NoConvergence { steps: usize, residual: f64, history: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be positive and finite, got {value}") })
    }
}

pub(crate) fn require_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name, reason: format!("must be non-negative and finite, got {value}") })
    }
}
