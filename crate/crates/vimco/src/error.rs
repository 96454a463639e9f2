use std::io;
use std::path::PathBuf;

use crate::plink::PlinkError;
use crate::tsv::TableError;

/// Errors surfaced by file handling, configuration and the drivers.
#[derive(Debug, thiserror::Error)]
pub enum VimcoError {
    /// Reading or writing a file failed.
    #[error("{path}: {source}")]
    Io {
        /// File involved.
        path: PathBuf,
        /// Underlying error.
        source: io::Error,
    },

    /// PLINK input could not be decoded.
    #[error(transparent)]
    Plink(#[from] PlinkError),

    /// A delimited text file is malformed.
    #[error(transparent)]
    Table(#[from] TableError),

    /// The numerical core rejected its input or failed.
    #[error(transparent)]
    Core(#[from] vimco_core::Error),

    /// A JSON document (checkpoint, manifest) is malformed.
    #[error("{path}: {message}")]
    Json {
        /// File involved.
        path: PathBuf,
        /// Parser message.
        message: String,
    },

    /// Bad command-line arguments or configuration values.
    #[error("{0}")]
    Usage(String),
}

/// How a failure maps onto a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    /// Exit code 1.
    Usage,
    /// Exit code 2.
    Data,
    /// Exit code 3.
    Numerical,
}

impl ExitKind {
    /// Process exit status.
    pub fn code(self) -> i32 {
        match self {
            ExitKind::Usage => 1,
            ExitKind::Data => 2,
            ExitKind::Numerical => 3,
        }
    }
}

impl VimcoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        VimcoError::Io {
            path: path.into(),
            source,
        }
    }

    /// Classifies the error for the exit status.
    pub fn kind(&self) -> ExitKind {
        use vimco_core::Error as E;
        match self {
            VimcoError::Usage(_) => ExitKind::Usage,
            VimcoError::Core(e) => match e {
                E::InvalidValue(_) | E::InfeasiblePleiotropy(_) | E::TooLarge(_) => ExitKind::Usage,
                E::NotPositiveDefinite(_)
                | E::NonFiniteUpdate { .. }
                | E::NonFiniteElbo
                | E::SingularCovariance => ExitKind::Numerical,
                _ => ExitKind::Data,
            },
            _ => ExitKind::Data,
        }
    }
}

/// Result alias for this crate.
pub type Result<T> = std::result::Result<T, VimcoError>;
