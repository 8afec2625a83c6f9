use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

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
    Numerical(#[from] oscint_core::Error),

    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("order fit: {0}")]
    Fit(String),
}

impl CliError {
    /// 1 for configuration and file problems, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Read { .. } | CliError::Write { .. } => 1,
            CliError::Numerical(_) | CliError::BlowUp { .. } | CliError::Fit(_) => 2,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        let path = PathBuf::from("<csv>");
        match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Write { path, source },
            other => CliError::Write {
                path,
                source: std::io::Error::other(format!("{other:?}")),
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
