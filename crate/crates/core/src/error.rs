use thiserror::Error;

use crate::expr::{DomainError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("domain error: {0}")]
    Domain(#[from] DomainError),
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("no value supplied for symbol `{0}`")]
    MissingSymbol(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pair is not controllable (Kalman rank {rank} < {n})")]
    NotControllable { rank: usize, n: usize },
    #[error("trajectory left the domain box at t = {t}")]
    BoxExit { t: f64 },
    #[error("map is constant on every sampled sphere around the control")]
    DegenerateMap,
    #[error("cannot reach the requested accuracy: {0}")]
    CannotAchieve(String),
    #[error("{0}")]
    Numerical(String),
    #[error("invalid input: {0}")]
    Input(String),
}

impl Error {
    /// Whether the failure is numerical (as opposed to malformed input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::NotControllable { .. }
                | Error::BoxExit { .. }
                | Error::DegenerateMap
                | Error::CannotAchieve(_)
                | Error::Numerical(_)
        )
    }
}
