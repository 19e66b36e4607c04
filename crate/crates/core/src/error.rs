//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("expected {expected} labels, got {got}")]
    LabelCount { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("linear system could not be solved: {0}")]
    Singular(String),

    #[error("unknown {kind} `{id}`; expected one of: {valid}")]
    UnknownId {
        kind: &'static str,
        id: String,
        valid: String,
    },

    #[error("no perfect matching: {0}")]
    NoPerfectMatching(String),

    #[error("metasample cap exceeded: more than {cap} metasamples")]
    CapExceeded { cap: usize },

    #[error("value overflows the integer range: {0}")]
    Overflow(String),

    #[error("all {0} trials failed")]
    AllTrialsFailed(usize),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
