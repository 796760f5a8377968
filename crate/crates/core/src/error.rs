use thiserror::Error;

/// Errors raised across the map, task and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("out of bounds: {0}")]
    Bounds(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("frame ordering: {0}")]
    Ordering(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("no admissible navigation goal: {0}")]
    NoGoal(String),
    #[error("no placement space: {0}")]
    NoSpace(String),
    #[error("plane fit failed: {0}")]
    Fit(String),
    #[error("insufficient inlier support: {found} of {total} points")]
    InsufficientSupport { found: usize, total: usize },
    #[error("goal unreachable: {0}")]
    Unreachable(String),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("scenario error at event {index}: {msg}")]
    Scenario { index: usize, msg: String },
    #[error("invalid document: {0}")]
    Document(String),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Domain failures (as opposed to malformed input) that a caller may
    /// recover from, e.g. by asking a human for help.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::NoGoal(_)
                | Error::NoSpace(_)
                | Error::Unreachable(_)
                | Error::NotFound(_)
                | Error::Fit(_)
                | Error::InsufficientSupport { .. }
                | Error::BackendUnavailable(_)
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Document(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
