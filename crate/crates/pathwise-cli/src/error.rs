//! Harness errors and the exit-code taxonomy.

use thiserror::Error;

/// Successful run.
pub const EXIT_OK: i32 = 0;
/// Failure outside the taxonomy, such as an unwritable output directory.
pub const EXIT_OTHER: i32 = 1;
/// The configuration failed to parse or validate.
pub const EXIT_CONFIG: i32 = 2;
/// The library refused to compute because a numerical precondition failed.
pub const EXIT_REFUSAL: i32 = 3;
/// A validation suite ran and at least one check failed.
pub const EXIT_ACCEPTANCE: i32 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Field-level diagnostics of an invalid configuration, one per line.
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    /// A refusal raised by the library.
    #[error(transparent)]
    Library(#[from] pathwise::error::Error),

    /// Checks of a validation suite failed.
    #[error("{failed} of {total} checks failed")]
    Acceptance { failed: usize, total: usize },

    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization failure: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => EXIT_CONFIG,
            HarnessError::Library(pathwise::error::Error::InvalidParameter(_)) => EXIT_CONFIG,
            HarnessError::Library(e) if e.is_precondition() => EXIT_OTHER,
            HarnessError::Library(_) => EXIT_REFUSAL,
            HarnessError::Acceptance { .. } => EXIT_ACCEPTANCE,
            HarnessError::Io { .. } | HarnessError::Json(_) => EXIT_OTHER,
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
