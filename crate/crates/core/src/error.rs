use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("revert data is not loaded; reversion-split features need a reverts file (use the plain feature mode instead)")]
    RevertsUnavailable,

    #[error("training data contains a single class")]
    SingleClass,

    #[error("class {label} has {count} members, fewer than the {folds} folds needed to stratify")]
    TooFewForFolds {
        label: &'static str,
        count: usize,
        folds: usize,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("autoencoder diverged in epoch {epoch}: loss {loss} is not finite (learning rate {rate} too high?)")]
    Diverged { epoch: usize, loss: f64, rate: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("infeasible generator request: {0}")]
    Infeasible(String),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
