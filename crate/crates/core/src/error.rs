use thiserror::Error;

/// Errors raised by state construction, estimators, attacks and the experiment harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension must be at least {min}, got {got}")]
    DimensionTooSmall { min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("vector is not normalized (squared norm {0})")]
    NotNormalized(f64),

    #[error("matrix is not unitary (max deviation of U^dag U from I is {0:e})")]
    NotUnitary(f64),

    #[error("POVM effects do not sum to the identity (max deviation {0:e})")]
    IncompletePovm(f64),

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("moment order {0} is not supported (maximum {max})", max = crate::haar::MAX_MOMENT_ORDER)]
    UnsupportedOrder(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("outcome {label} has zero probability under the source distribution")]
    InconsistentOutcome { label: usize },

    #[error("label {label} is outside the outcome set of size {size}")]
    LabelOutOfRange { label: usize, size: usize },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("corruption budget exceeded: {used} changes with a budget of {budget}")]
    BudgetExceeded { used: usize, budget: usize },

    #[error("sample count {got} exceeds the limit {max} for {what}")]
    TooManySamples {
        what: &'static str,
        got: usize,
        max: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
