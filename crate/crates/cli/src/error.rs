use std::process::ExitCode;

use fairdraw_service::ErrorBody;
use thiserror::Error;

/// Exit status contract: 0 ok, 1 verification failure, 2 usage error,
/// 3 protocol or phase error.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Protocol(String),
    /// A structured rejection from the coordinator, shown verbatim.
    #[error("{}: {}", .body.error, .body.message)]
    Rejected { status: u16, body: ErrorBody },
    #[error("cannot reach coordinator: {0}")]
    Transport(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 2,
            CliError::Protocol(_) | CliError::Rejected { .. } | CliError::Transport(_) => 3,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }

    /// Error code reported by the coordinator, if this is a rejection.
    pub fn code(&self) -> Option<&str> {
        match self {
            CliError::Rejected { body, .. } => Some(&body.error),
            _ => None,
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> ExitCode {
        ExitCode::from(e.exit_code())
    }
}
