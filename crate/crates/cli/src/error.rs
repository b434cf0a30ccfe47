use thiserror::Error;

/// Failures of a command, split by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or inconsistent settings (exit 2).
    #[error("config error: {0}")]
    Config(String),
    /// Unreadable, malformed or unwritable data (exit 3).
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }
}

impl From<neurocomm::Error> for CliError {
    fn from(e: neurocomm::Error) -> Self {
        use neurocomm::Error as E;
        match e {
            E::Parse { .. } | E::Io(_) => CliError::Data(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn config_err<T>(message: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(message.into()))
}
