use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("{what} out of range: {value} not in {range}")]
    OutOfRange {
        what: &'static str,
        value: String,
        range: String,
    },

    #[error("numerical blow-up at t={t}: non-finite {what}")]
    Diverged { t: usize, what: &'static str },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid schedule (kappa1={kappa1}, kappa2={kappa2}): violated {condition}")]
    InvalidSchedule {
        kappa1: f64,
        kappa2: f64,
        condition: &'static str,
    },

    #[error("infeasible instance at t={t}: {reason}")]
    Infeasible { t: usize, reason: String },

    #[error("no convergence at t={t} after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        t: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("ingestion failed for {path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
