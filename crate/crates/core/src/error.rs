use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid job mix: {0}")]
    InvalidMix(String),

    #[error("invalid fleet: {0}")]
    InvalidFleet(String),

    #[error("invalid job classes: {0}")]
    InvalidClasses(String),

    #[error("dimension mismatch: expected {expected} {what}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid price {value} at position {index}: prices must be finite and nonnegative")]
    InvalidPrice { index: usize, value: f64 },

    #[error("{what} exceeds capacity: {got} > {limit}")]
    Capacity {
        what: &'static str,
        got: usize,
        limit: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
