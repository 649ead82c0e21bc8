use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameter {name}: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("{what} has length {got}, expected {expected}")]
    Shape {
        what: &'static str,
        expected: String,
        got: usize,
    },

    #[error("index {index} has no interior neighbours in a curve of length {len}")]
    Edge { index: usize, len: usize },

    #[error("video {video_id:?}: field `{field}`{}: {reason}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Validation {
        video_id: String,
        field: String,
        line: Option<usize>,
        reason: String,
    },

    #[error("video {video_id:?}: declares units {found:?} but the file declares {expected:?}")]
    UnitMismatch {
        video_id: String,
        expected: String,
        found: String,
    },

    #[error("malformed document at line {line}, column {column}: {reason}")]
    Syntax {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn range(what: &'static str, value: f64, lo: f64, hi: f64) -> Self {
        Error::Range {
            what,
            value,
            lo,
            hi,
        }
    }
}
