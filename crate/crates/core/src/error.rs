use thiserror::Error;

/// Errors produced by the fusion library.
#[derive(Debug, Error)]
pub enum FusionError {
    #[error("invalid parameter grid: {0}")]
    InvalidGrid(String),

    #[error("invalid field values: {0}")]
    InvalidValues(String),

    #[error("field is not consonant: maximum {max} differs from 1")]
    NotConsonant { max: f64 },

    #[error("theta = {theta} lies outside the grid domain [{min}, {max}]")]
    OutOfDomain { theta: f64, min: f64, max: f64 },

    #[error("degenerate field: every value is zero, no candidate is plausible")]
    DegenerateField,

    #[error("invalid level {0}: alpha must lie in [0, 1)")]
    InvalidLevel(f64),

    #[error("expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("value {0} lies outside the admissible range")]
    Range(f64),

    #[error("contours live on different grids and no common grid was supplied")]
    GridMismatch,

    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error("at least {min} samples are required, got {got}")]
    InsufficientSamples { got: usize, min: usize },

    #[error("rule `{0}` failed the monotonicity audit")]
    NonMonotoneRule(String),

    #[error("no closed-form calibrator for rule `{rule}` with k = {k}")]
    UnsupportedClosedForm { rule: String, k: usize },

    #[error("claim is empty")]
    EmptyClaim,

    #[error("invalid claim: {0}")]
    InvalidClaim(String),

    #[error("invalid study specification: {0}")]
    InvalidSpec(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FusionError> = std::result::Result<T, E>;
