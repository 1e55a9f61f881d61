use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("input file {} does not exist", .0.display())]
    MissingInput(PathBuf),
    #[error("{}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: hankel_core::Error,
    },
    #[error("could not write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] hankel_core::Error),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    /// 2 for bad invocations (including missing files), 1 for failures
    /// during the run.
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) | CliError::MissingInput(_) => ExitCode::from(2),
            _ => ExitCode::from(1),
        }
    }
}
