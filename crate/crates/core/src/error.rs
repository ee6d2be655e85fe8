use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data whose shape or content does not fit the operation.
    #[error("rejected input: {0}")]
    RejectedInput(String),

    /// A hyperparameter or argument outside its valid range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Caller broke a pairing contract (stale cache, records not matching data, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Correlation of a constant series.
    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($arg:tt)+) => {
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !$cond {
            return Err($crate::Error::$variant(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
