use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure categories for the whole crate. The CLI maps these onto exit
/// codes, so keep the split between configuration problems, malformed
/// input data, and numeric breakdowns intact.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside an operation's domain (bad label index,
    /// off-simplex probability vector, unsupported class count, ...).
    #[error("domain: {0}")]
    Domain(String),

    /// An invalid generation or run configuration. Messages name the
    /// offending table row where one exists.
    #[error("config: {0}")]
    Config(String),

    /// Malformed input data. Messages name the byte offset (binary
    /// formats) or line number (text formats).
    #[error("parse: {path}: {message}")]
    Parse { path: String, message: String },

    /// A numeric failure, e.g. a NaN encountered mid-training.
    #[error("numeric: {0}")]
    Numeric(String),

    /// A required theorem precondition does not hold (strict mode).
    #[error("conditions: {0}")]
    Conditions(String),

    /// A verification run found a counterexample.
    #[error("violation: {0}")]
    Violation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn parse(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: msg.into(),
        }
    }
}
