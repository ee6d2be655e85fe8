use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Unreadable or invalid configuration. Raised before anything is written.
    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("output directory {0} is not empty; pass --force to write into it")]
    OutputNotEmpty(PathBuf),

    #[error(transparent)]
    Core(#[from] cilfair_core::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot serialize {what}: {message}")]
    Serialize { what: String, message: String },
}

impl HarnessError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        HarnessError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config { .. } | HarnessError::OutputNotEmpty(_) => 2,
            _ => 3,
        }
    }
}
