use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "kernel matrix over {count} samples is singular after jitter; \
         duplicate or near-duplicate sample poses are the usual cause"
    )]
    SingularKernel { count: usize },

    #[error("sample batch rejected: {0}")]
    NonFiniteSample(String),

    #[error("non-finite cost at the initial point in {factor}")]
    NonFiniteCost { factor: String },

    #[error("no object map for classes: {}", .0.join(", "))]
    MissingClasses(Vec<String>),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("degenerate circular mean at waypoint {0}")]
    DegenerateOrientation(usize),

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
