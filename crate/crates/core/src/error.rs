use thiserror::Error;

/// Errors produced by the link-level primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid frame configuration: {0}")]
    InvalidFrame(String),

    #[error("invalid channel profile: {0}")]
    InvalidProfile(String),

    #[error("index ({m}, {n}) outside the {rows}x{cols} grid")]
    IndexOutOfRange {
        m: usize,
        n: usize,
        rows: usize,
        cols: usize,
    },

    #[error("duplicate pilot position ({0}, {1})")]
    DuplicatePosition(usize, usize),

    #[error("unsupported QAM order {0}")]
    UnsupportedQamOrder(usize),

    #[error("bit length mismatch: expected {expected}, got {got}")]
    BitLengthMismatch { expected: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("pilot energy is zero")]
    ZeroPilotEnergy,

    #[error("data energy is zero")]
    ZeroDataEnergy,

    #[error("all channel gain estimates are zero")]
    ZeroChannelEstimate,

    #[error("scheme mismatch: {0}")]
    SchemeMismatch(&'static str),

    #[error("invalid search configuration: {0}")]
    InvalidSearch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err(expected: impl ToString, got: impl ToString) -> Error {
    Error::ShapeMismatch {
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
