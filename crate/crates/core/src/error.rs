use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("integral diverges: {condition}")]
    Divergence { condition: String },

    #[error("consistency check failed: {what} (observed {observed:.3e}, allowed {allowed:.3e})")]
    Consistency {
        what: String,
        observed: f64,
        allowed: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
