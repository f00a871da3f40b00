use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid class count {0}: at least 2 classes are required")]
    InvalidClassCount(usize),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("class index {index} out of range for {m} classes")]
    ClassOutOfRange { index: usize, m: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("log-probability {0} is positive")]
    Domain(f64),
    #[error("invalid count interval [{lo}, {hi}] for {n} trials")]
    InvalidInterval { lo: usize, hi: usize, n: usize },
    #[error("evaluation requires hidden truth for every test instance")]
    MissingTruth,
    #[error("degenerate statistic: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
