use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("message of {len} bytes exceeds capacity {capacity} for version {version}-{level}")]
    CapacityExceeded {
        len: usize,
        capacity: usize,
        version: u8,
        level: char,
    },

    #[error("unsupported QR parameter: {0}")]
    UnsupportedQr(String),

    #[error("unreadable format information")]
    FormatInfo,

    #[error("block {block} is uncorrectable")]
    Uncorrectable { block: usize },

    #[error("malformed segment: {0}")]
    MalformedSegment(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("solver diverged: {0}")]
    Diverged(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
