use alloc::string::String;

use thiserror::Error;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("weight vector is zero")]
    ZeroWeight,

    #[error("point lies exactly on the decision boundary")]
    OnBoundary,

    #[error("arg-max is tied between classes {0} and {1}")]
    ArgmaxTie(usize, usize),

    #[error("invalid covariance matrix: {0}")]
    InvalidCovariance(String),

    #[error("no coordinate passes the threshold; signal-dependent covariance has empty support")]
    EmptySupport,

    #[error("direction lies in the null space of the covariance")]
    NullDirection,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
