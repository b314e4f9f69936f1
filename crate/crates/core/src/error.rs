use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("field `{field}`: {message}")]
    Parse { field: String, message: String },

    #[error("weight {value} lies outside [-{bound}, {bound}]")]
    StateCorruption { value: f64, bound: f64 },

    #[error("integration did not reach the end time within {steps} steps")]
    IntegrationFailure { steps: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("internal invariant broken: {0}")]
    Invariant(String),

    #[error("run {run} (tau index {tau_index}) failed: {source}")]
    RunFailed {
        run: usize,
        tau_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse category used for CLI exit codes.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 3,
            Error::Io { .. } => 5,
            _ => 4,
        }
    }
}
