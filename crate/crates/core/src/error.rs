use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("metric not positive-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("metric ill-conditioned (smallest eigenvalue {min_eigenvalue:e}, condition number {condition:e})")]
    IllConditioned { min_eigenvalue: f64, condition: f64 },

    #[error("metric not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("point {point:?} outside the provider's valid region")]
    OutsideRegion { point: Vec<f64> },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("log map from {from} to datum {to} failed: {source}")]
    LogFailure {
        /// The base point, e.g. `datum 3` or `iterate 7`.
        from: String,
        to: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bridge guidance overflow at t = {t} (|z - v|/(T - t) = {magnitude:e})")]
    GuidanceOverflow { t: f64, magnitude: f64 },

    #[error("all {0} sample paths failed")]
    AllPathsFailed(usize),

    #[error("too many failed samples: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("degenerate target: {0}")]
    DegenerateTarget(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension",
            Error::NonFinite(_) => "non-finite",
            Error::NotPositiveDefinite { .. } => "not-positive-definite",
            Error::IllConditioned { .. } => "ill-conditioned",
            Error::NotSymmetric(_) => "not-symmetric",
            Error::OutsideRegion { .. } => "outside-region",
            Error::NoConvergence { .. } => "no-convergence",
            Error::LogFailure { .. } => "log-failure",
            Error::GuidanceOverflow { .. } => "guidance-overflow",
            Error::AllPathsFailed(_) => "all-paths-failed",
            Error::TooManyFailures { .. } => "too-many-failures",
            Error::DegenerateTarget(_) => "degenerate-target",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidWeights(_) => "invalid-weights",
            Error::Parse(_) => "parse",
            Error::Io { .. } => "io",
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}
