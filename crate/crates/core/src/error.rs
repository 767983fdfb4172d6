use std::path::PathBuf;

/// Errors raised anywhere in the solver stack.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("topology error: {0}")]
    Topology(String),
    #[error("point ({x}, {y}) lies outside triangle {tri}")]
    PointOutside { tri: usize, x: f64, y: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("iterative solver did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("micro solver unstable at step {step}: {reason}")]
    Instability { step: usize, reason: String },
    #[error("nodal vector {node} has zero length at renormalization")]
    ZeroLength { node: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("triangle {tri}: {source}")]
    Triangle {
        tri: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("macro step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("configuration: {0}")]
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
        Error::Io { path: path.into(), source }
    }

    /// True for errors caused by bad user input (configuration, files, parameters)
    /// rather than by the numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Parse { .. }
            | Error::Topology(_)
            | Error::InvalidParameter(_)
            | Error::Unsupported(_)
            | Error::Config(_)
            | Error::Io { .. } => true,
            Error::Triangle { source, .. } | Error::Step { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
