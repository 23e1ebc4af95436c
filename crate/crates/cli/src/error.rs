use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] teleham_core::Error),

    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    /// 2 for usage errors, 3 for refused preconditions.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(teleham_core::Error::Smearing { .. }) => 2,
            CliError::Core(_) | CliError::Io { .. } => 3,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
