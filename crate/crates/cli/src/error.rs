use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(eeatc::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 1 for usage and configuration problems, 2 for data problems.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Io { .. } => 2,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

impl From<eeatc::Error> for CliError {
    fn from(e: eeatc::Error) -> Self {
        match e {
            eeatc::Error::BadConfig(_) | eeatc::Error::InvalidFeatureSpec(_) | eeatc::Error::InvalidFraction(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Data(other),
        }
    }
}
