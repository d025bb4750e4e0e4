use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("non-finite value in {quantity}")]
    NonFinite { quantity: String },

    #[error("{algorithm} diverged at iteration {iteration}: non-finite {quantity}")]
    Diverged {
        algorithm: String,
        iteration: u64,
        quantity: String,
    },

    #[error("replica consistency violated at iteration {iteration}: {detail}")]
    Consistency { iteration: u64, detail: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the CLI: 2 divergence, 3 configuration or
    /// input error, 4 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::NonFinite { .. } | Error::Consistency { .. } => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}
