//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the functional regression pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid mismatch: expected {expected} nodes, got {found}")]
    GridMismatch { expected: usize, found: usize },

    #[error("value length {found} does not match grid size {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("sample is empty")]
    EmptySample,

    #[error("sample sizes differ: {left} vs {right}")]
    SampleSizeMismatch { left: usize, right: usize },

    #[error("sample must be centered first (call center())")]
    NotCentered,

    #[error("sample mean is not zero (sup deviation {deviation:.3e}); cannot mark as centered")]
    NotActuallyCentered { deviation: f64 },

    #[error("operator kernel is not symmetric (max asymmetry {max_deviation:.3e})")]
    AsymmetricKernel { max_deviation: f64 },

    #[error("degenerate sample: covariance operator has numerical rank 0")]
    DegenerateSample,

    #[error("design matrix numerically singular (condition number {condition:.3e}); m1 is too large for the data")]
    SingularDesign { condition: f64 },

    #[error("invalid dimension {value}: {reason}")]
    InvalidDimension { value: usize, reason: &'static str },

    #[error("basis system is not orthonormal (max Gram deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },

    #[error("basis has {available} functions, need at least {needed}")]
    BasisTooSmall { needed: usize, available: usize },

    #[error("need at least {needed} observations, got {found}")]
    TooFewObservations { needed: usize, found: usize },

    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("column {column:?} not found in CSV header")]
    MissingColumn { column: String },

    #[error("non-numeric value {value:?} in column {column:?} at data row {row}")]
    NonNumericCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("series of length {len} contains no full day of {points_per_day} points")]
    NoFullDays { len: usize, points_per_day: usize },

    #[error("log transform undefined for value {value} at position {index}")]
    LogDomain { index: usize, value: f64 },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("model file invalid: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, Error>;
