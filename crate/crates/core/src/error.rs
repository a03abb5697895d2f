use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("model error: {0}")]
    Model(String),

    #[error("case file: {0}")]
    Case(String),

    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e})")]
    PowerFlowDivergence { iterations: usize, mismatch: f64 },

    #[error("initialization failed at {component}: {reason}")]
    Init { component: String, reason: String },

    #[error("integration failed after t = {time:.4} s: {reason}")]
    Integration { time: f64, reason: String },

    /// Distinct from [`Error::Integration`]: the network algebraic system has
    /// no solution (voltage collapse or a disconnected island).
    #[error("simulation collapse at t = {time:.4} s: {reason}")]
    Collapse { time: f64, reason: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape mismatch: {what} expects {expected}, got {actual}")]
    Shape {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("non-finite loss during update: {0}")]
    NonFiniteLoss(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_collapse(&self) -> bool {
        matches!(self, Error::Collapse { .. })
    }

    /// Collapse or a failed integration step.
    pub fn is_simulation_failure(&self) -> bool {
        matches!(self, Error::Collapse { .. } | Error::Integration { .. })
    }
}
