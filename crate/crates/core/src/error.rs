use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Feature count or index sets are unusable.
    InvalidModel(String),
    /// Coefficient map does not match its feature set.
    InvalidStrategy(String),
    /// Knowledge fractions violate `max(0, g1+g2-1) <= g12 <= min(g1, g2)`.
    InvalidRegime(String),
    /// Quadrature order outside `1..=512`.
    InvalidOrder(usize),
    /// Search or sampling configuration is unusable.
    InvalidConfig(String),
    /// Covariance has an eigenvalue below the PSD tolerance.
    NotPsd { min_eigenvalue: f64 },
    /// An iterative routine failed to converge.
    NumericalFailure(String),
    /// Exhaustive enumeration would exceed the state-space limit.
    Capacity { states: u128, limit: u128 },
}

impl Error {
    /// True for errors caused by the numbers rather than the inputs' shape.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. } | Error::NumericalFailure(_) | Error::Capacity { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidModel(msg) => write!(f, "invalid model: {msg}"),
            Error::InvalidStrategy(msg) => write!(f, "invalid strategy: {msg}"),
            Error::InvalidRegime(msg) => write!(f, "invalid regime: {msg}"),
            Error::InvalidOrder(m) => {
                write!(f, "invalid quadrature order {m}: must be in 1..=512")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::NotPsd { min_eigenvalue } => write!(
                f,
                "covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e})"
            ),
            Error::NumericalFailure(msg) => write!(f, "numerical failure: {msg}"),
            Error::Capacity { states, limit } => write!(
                f,
                "state space of {states} outcomes exceeds the enumeration limit {limit}"
            ),
        }
    }
}

impl core::error::Error for Error {}
