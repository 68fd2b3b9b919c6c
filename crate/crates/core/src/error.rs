//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by models, posteriors, samplers and mechanisms.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("record does not match dataset kind: {0}")]
    KindMismatch(String),

    #[error("beta must be greater than 1, got {0}")]
    InvalidBeta(f64),

    #[error("epsilon {requested} is infeasible for M = {m}: the minimum achievable epsilon is {minimum}")]
    InfeasibleEpsilon { requested: f64, m: f64, minimum: f64 },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("features outside [0, 1]: record {record}, column {column}, value {value}")]
    UnscaledFeatures { record: usize, column: usize, value: f64 },

    #[error("sampler adaptation failed: {0}")]
    AdaptationFailed(String),

    #[error("release refused, chain diagnostics flagged: {0}")]
    DiagnosticsFailed(String),

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
