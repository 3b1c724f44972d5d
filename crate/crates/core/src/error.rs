use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong inside the auditing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("guarantee unattainable at N={n}: order-statistic index {b_index} exceeds N")]
    GuaranteeUnattainable { b_index: usize, n: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{module}: {source}")]
    Module {
        module: &'static str,
        #[source]
        source: Box<Error>,
    },
}

/// Broad failure class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Internal,
}

impl Error {
    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn dimension(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Tags the error with the module it surfaced from.
    pub fn in_module(self, module: &'static str) -> Self {
        match self {
            e @ Error::Module { .. } => e,
            e => Error::Module {
                module,
                source: Box::new(e),
            },
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidArgument(_) | Error::GuaranteeUnattainable { .. } => ErrorKind::Usage,
            Error::Parse { .. } | Error::Io { .. } | Error::InvalidData(_) | Error::Json(_) => {
                ErrorKind::Data
            }
            Error::Dimension { .. } => ErrorKind::Internal,
            Error::Module { source, .. } => source.kind(),
        }
    }
}

pub(crate) trait ModuleContext<T> {
    fn module(self, module: &'static str) -> Result<T>;
}

impl<T> ModuleContext<T> for Result<T> {
    fn module(self, module: &'static str) -> Result<T> {
        self.map_err(|e| e.in_module(module))
    }
}
