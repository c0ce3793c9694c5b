use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors surfaced by the command-line pipeline, each with an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: file ends after {read} of {expected} bytes")]
    PartialRead { path: PathBuf, read: u64, expected: u64 },
    #[error(transparent)]
    Core(#[from] cvqrng_core::Error),
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 insufficient data, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        use cvqrng_core::Error as E;
        match self {
            CliError::Validation(_) | CliError::Format(_) => 2,
            CliError::InsufficientData(_) => 3,
            CliError::Io { .. } | CliError::PartialRead { .. } => 4,
            CliError::Core(e) => match e {
                E::InsufficientData { .. } | E::SeedExhausted { .. } | E::EmptyBlock => 3,
                _ => 2,
            },
        }
    }
}
