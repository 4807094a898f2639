use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("infeasible quota: k = {quota} exceeds support size {support}")]
    InfeasibleQuota { quota: f64, support: usize },

    #[error("step sizes are 1-indexed; t = 0 is not a valid iteration")]
    ZeroIteration,

    #[error("solver diverged at iteration {iteration}: {reason}")]
    Divergence { iteration: usize, reason: String },

    #[error("zero capacity on supported pair (file {file}, server {server})")]
    SingularRate { file: usize, server: usize },

    #[error("unstable queue at server {server}: load {load:.6} >= 1")]
    UnstableQueue { server: usize, load: f64 },

    #[error("reference oracle failed: {0}")]
    OracleFailure(String),

    #[error("negative input to {context}")]
    NegativeInput { context: &'static str },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(values: &[f64], context: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

pub(crate) fn ensure_len(values: &[f64], expected: usize, context: &'static str) -> Result<()> {
    if values.len() == expected {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got: values.len(),
        })
    }
}
