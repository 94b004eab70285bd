use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the optimizers, the lifecycle driver and the harness.
#[derive(Debug, Error)]
pub enum SbiError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("step size h = {h} exceeds 1, mass bounds are not guaranteed")]
    StepSizeViolation { h: f64 },

    #[error("singular velocity update for agent {agent}: bracket = {bracket}")]
    SingularUpdate { agent: usize, bracket: f64 },

    #[error("fixed-point oracle did not converge after {iterations} iterations (residual {residual:e})")]
    OracleFailure { iterations: usize, residual: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },
}

impl SbiError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SbiError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(context: impl Into<String>, message: impl std::fmt::Display) -> Self {
        SbiError::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SbiError>;
