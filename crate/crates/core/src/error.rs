use thiserror::Error;

/// Errors raised by the log-mean linear toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LmlError {
    #[error("vector length {len} is not 2^{p}")]
    LengthMismatch { len: usize, p: usize },

    #[error("number of variables {0} is out of range (1..={max})", max = crate::subset::MAX_VARIABLES)]
    VariableCountOutOfRange(usize),

    #[error("variable {var} is not in 1..={p}")]
    VariableOutOfRange { var: usize, p: usize },

    #[error("subset mask {mask:#b} does not fit in {p} variables")]
    SubsetOutOfRange { mask: usize, p: usize },

    #[error("non-finite entry at index {0}")]
    NonFinite(usize),

    #[error("inadmissible {kind} parameter: {reason}")]
    Inadmissible { kind: &'static str, reason: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid constraint matrix: {0}")]
    InvalidConstraints(String),

    #[error("invalid counts: {0}")]
    InvalidCounts(String),

    #[error("invalid solver options: {0}")]
    InvalidOptions(String),

    #[error("constraint system is rank deficient at iteration {iteration}")]
    RankDeficient { iteration: usize },

    #[error("fit did not converge")]
    NotConverged,

    #[error("invalid table: {0}")]
    InvalidTable(String),
}

pub type Result<T> = std::result::Result<T, LmlError>;
