use std::path::PathBuf;

use signsieve::Error as CoreError;

/// Failures of a run, grouped by the exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad input, 3 for infeasible requests, 4 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Input(_) => 2,
            Self::Infeasible(_) => 3,
            Self::Internal(_) => 4,
            // unreadable inputs dominate; a failed write is reported the same way
            Self::Io { .. } => 2,
            Self::Core(e) => match e {
                CoreError::SingularCA { .. }
                | CoreError::InfeasibleConstraints
                | CoreError::EmptyPool
                | CoreError::ZeroUe2
                | CoreError::DegenerateSupport { .. } => 3,
                CoreError::NotPsd { .. } => 4,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
