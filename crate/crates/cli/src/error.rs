use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes.
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_CHECK: u8 = 4;
pub const EXIT_OTHER: u8 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Library(#[from] tdlattice::Error),
    #[error("{0} check(s) failed")]
    Checks(usize),
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Library(e) if e.is_numeric_precondition() => EXIT_NUMERIC,
            CliError::Library(
                tdlattice::Error::InvalidInput { .. } | tdlattice::Error::Domain(_),
            ) => EXIT_CONFIG,
            CliError::Checks(_) => EXIT_CHECK,
            CliError::Read { .. } | CliError::Write { .. } | CliError::Library(_) => EXIT_OTHER,
        }
    }
}
