use std::path::PathBuf;

use thiserror::Error;

use crate::metrics::MetricsError;
use crate::numerics::NumericsError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{what}, line {line}: {msg}")]
    Parse {
        what: String,
        line: usize,
        msg: String,
    },
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("vocabulary of {vocab} entries cannot supply {negatives} negatives plus a target")]
    InsufficientVocabulary { vocab: usize, negatives: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid value: {0}")]
    Validation(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("incompatible artifacts: {0}")]
    Incompatible(String),
    #[error("loss diverged (non-finite) at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },
    #[error("label not found: {0}")]
    LabelNotFound(String),
    #[error("infeasible synthetic corpus spec: {0}")]
    Spec(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Stable short name for machine-readable error reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Numerics(NumericsError::DegenerateMask) => "degenerate-mask",
            Error::Numerics(_) => "numerics",
            Error::Metrics(_) => "metrics",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::EmptyCorpus => "empty-corpus",
            Error::InsufficientVocabulary { .. } => "insufficient-vocabulary",
            Error::Config(_) => "config",
            Error::Validation(_) => "validation",
            Error::Shape(_) => "shape",
            Error::Incompatible(_) => "artifact-incompatibility",
            Error::Divergence { .. } => "divergence",
            Error::LabelNotFound(_) => "label-not-found",
            Error::Spec(_) => "spec",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
