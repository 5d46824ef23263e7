use thiserror::Error;

/// Errors raised across the library. Each variant maps to a CLI exit code
/// through [`Error::exit_code`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("size {size} exceeds the limit {limit}")]
    TooLarge { size: u128, limit: u128 },
    #[error("division by zero")]
    DivisionByZero,
    #[error("{ell} does not divide q - 1 = {q_minus_one}")]
    OrderMismatch { ell: u64, q_minus_one: u64 },
    #[error("characters live on different fields")]
    FieldMismatch,
    #[error("all curve coefficients are zero")]
    DegenerateCurve,
    #[error("value {value} is {distance:e} away from the nearest integer (budget {budget:e})")]
    RoundingBudgetExceeded {
        value: f64,
        distance: f64,
        budget: f64,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("expected {expected} pairs, got {got}")]
    WrongCount { expected: usize, got: usize },
    #[error("pair (p = {p}, ell = {ell}) is not admissible: {reason}")]
    CongruenceViolation { p: u64, ell: u64, reason: String },
    #[error("matrix is numerically singular (pivot column {column})")]
    SingularMatrix { column: usize },
    #[error("relative residual {0:e} exceeds the required bound")]
    ResidualTooLarge(f64),
    #[error("no admissible (p, ell) pairs in range")]
    EmptyPairSet,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// 3 for numerical failures, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::RoundingBudgetExceeded { .. }
            | Error::SingularMatrix { .. }
            | Error::ResidualTooLarge(_) => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
