use std::path::PathBuf;

use cca_core::CcaError;

/// Exit code for success.
pub const EXIT_OK: i32 = 0;
/// Exit code for unreadable, malformed or out-of-domain input.
pub const EXIT_INVALID: i32 = 2;
/// Exit code when FastICA hits its iteration cap.
pub const EXIT_NON_CONVERGENCE: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CcaError),
}

impl CliError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self::Invalid(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(e) if is_non_convergence(e) => EXIT_NON_CONVERGENCE,
            _ => EXIT_INVALID,
        }
    }
}

fn is_non_convergence(e: &CcaError) -> bool {
    match e {
        CcaError::NonConvergence { .. } => true,
        CcaError::Block { source, .. } => is_non_convergence(source),
        _ => false,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
