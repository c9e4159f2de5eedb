use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("value {value} outside the unit interval")]
    Domain { value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("csv parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("duplicate observation for unit {unit} at time {time}")]
    DuplicateObservation { unit: String, time: usize },

    #[error("unit {0} has no observations")]
    EmptyUnit(String),

    #[error(
        "unit {unit} has a rank-deficient sieve design ({observations} observations for {columns} \
         coefficients); reduce the number of interior knots"
    )]
    RankDeficientUnit {
        unit: String,
        observations: usize,
        columns: usize,
    },

    #[error("pooled design of group {0} is singular")]
    SingularGroupGram(usize),

    #[error("degenerate fit: post-selection mean squared error is zero")]
    DegenerateFit,

    #[error("group index {index} out of range ({groups} groups)")]
    GroupIndex { index: usize, groups: usize },

    #[error("HAC window {window} must be smaller than the number of periods {periods}")]
    HacWindow { window: usize, periods: usize },

    #[error("every candidate lambda failed: {0}")]
    AllLambdasFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
