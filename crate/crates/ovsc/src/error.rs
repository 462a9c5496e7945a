use std::io;
use std::path::PathBuf;

/// Errors from file handling, argument checking and the clustering core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] ovsc_core::Error),

    #[error("JSON encoding failed: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Process exit status: 1 usage or configuration, 2 data, 3 numerical.
    pub fn exit_code(&self) -> u8 {
        use ovsc_core::Error as Core;
        match self {
            Error::Usage(_) | Error::Core(Core::Config(_) | Core::Infeasible(_)) => 1,
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Json(_)
            | Error::Core(Core::Data(_) | Core::Contract(_) | Core::UndefinedRate(_)) => 2,
            Error::Core(Core::Numerical(_) | Core::IndeterminateCount(_)) => 3,
        }
    }
}
