use thiserror::Error;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const MISMATCH: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const IO: i32 = 5;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] rgm_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use rgm_core::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Config(_) => exit::MISMATCH,
            CliError::Core(e) => match e {
                E::NumericalFailure(_) => exit::NUMERICAL,
                E::Io(_) | E::Csv(_) => exit::IO,
                E::InvalidArgument(_)
                | E::InvalidState(_)
                | E::UnsupportedSchedule(_)
                | E::VersionMismatch { .. }
                | E::CorruptFile(_)
                | E::Json(_) => exit::MISMATCH,
            },
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
