use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite loss value {0}")]
    NonFiniteLoss(f64),

    #[error("non-finite importance ratio at sample {index} (log-ratio {log_ratio})")]
    NonFiniteRatio { index: usize, log_ratio: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid process parameters: {0}")]
    InvalidParams(String),

    #[error("invalid fault spec: {0}")]
    InvalidFault(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration invalid:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error("environment failure at step {step}: {source}")]
    Environment {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: field `{field}`: {message}")]
    Parse {
        path: PathBuf,
        field: String,
        message: String,
    },

    #[error("record `{0}` already exists")]
    Duplicate(String),

    #[error("missing from store: {}", .0.join(", "))]
    Missing(Vec<String>),

    #[error("{0}")]
    Store(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_)
                | Error::InvalidArgument(_)
                | Error::InvalidFault(_)
                | Error::InvalidParams(_)
                | Error::InvalidSpec(_)
                | Error::Missing(_)
                | Error::Duplicate(_)
        )
    }
}
