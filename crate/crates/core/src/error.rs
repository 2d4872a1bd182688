use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the extraction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("sentence {sentence_id}: {message}")]
    Annotation {
        sentence_id: String,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("cosine similarity undefined for a zero-norm vector")]
    UndefinedSimilarity,

    #[error("unknown token `{0}`")]
    Lookup(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Divergence { epoch: usize },

    #[error("gradient check failed for `{path}`: relative deviation {deviation:.3e} exceeds {tolerance:.1e}")]
    GradientMismatch {
        path: String,
        deviation: f64,
        tolerance: f64,
    },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    /// Process exit code: 1 validation, 2 data, 3 divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension { .. } | Error::Lookup(_) => 1,
            Error::Divergence { .. } | Error::GradientMismatch { .. } => 3,
            Error::Stage { source, .. } => source.exit_code(),
            Error::Parse { .. }
            | Error::Annotation { .. }
            | Error::UndefinedSimilarity
            | Error::Data(_)
            | Error::Io { .. } => 2,
        }
    }
}
