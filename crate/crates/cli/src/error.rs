use std::fmt;

/// Failure of a subcommand, split by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration values. Exit code 2.
    Usage(String),
    /// Everything that goes wrong while doing the work. Exit code 1.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

impl From<recess_core::Error> for CliError {
    fn from(e: recess_core::Error) -> Self {
        match e {
            recess_core::Error::Parameter(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub fn runtime(message: impl Into<String>) -> CliError {
    CliError::Runtime(message.into())
}

pub fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}
