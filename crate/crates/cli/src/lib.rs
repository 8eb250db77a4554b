//! Library side of the `hlp` binary: config parsing and experiment runs.

pub mod config;
pub mod run;

use std::path::PathBuf;

use hlp_core::hybrid::ExecError;
use hlp_core::solver::SolveError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for anything the user can fix in the config or filesystem, 2 when
    /// integration itself broke down.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Numerical(_) => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<ExecError> for CliError {
    fn from(e: ExecError) -> Self {
        match e {
            ExecError::InvalidConfig(_) | ExecError::StartsOnGuard => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Exec(e) => e.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}
