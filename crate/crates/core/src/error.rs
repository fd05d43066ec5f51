use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid shift: {0}")]
    InvalidShift(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shifted count {shifted} exceeds the {available} streams of case `{case}`")]
    CountOverflow {
        case: String,
        shifted: usize,
        available: usize,
    },

    #[error("could not bracket the control limit: {0}")]
    BracketFailure(String),

    #[error("report format error: {0}")]
    Format(String),
}
