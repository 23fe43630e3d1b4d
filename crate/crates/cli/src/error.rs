use std::path::PathBuf;

use thiserror::Error;

use crate::check::ConvergenceReport;

/// Failures of a run, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: rovib_core::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("convergence check failed: max drift {:.3e} (tolerance {:.1e})", .0.max_drift(), .0.tolerance)]
    NotConverged(Box<ConvergenceReport>),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use rovib_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => EXIT_CONFIG,
            CliError::Core { source, .. } => match source {
                E::Config(_)
                | E::Format { .. }
                | E::Domain { .. }
                | E::Lookup(_)
                | E::Coverage(_)
                | E::Io(_) => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            },
            CliError::NotConverged(_) => EXIT_NOT_CONVERGED,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Attaches job context to core errors.
pub trait Context<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T>;
}

impl<T> Context<T> for rovib_core::Result<T> {
    fn context(self, what: impl FnOnce() -> String) -> Result<T> {
        self.map_err(|source| CliError::Core {
            context: what(),
            source,
        })
    }
}
