use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("state {0} lies outside the truncated basis")]
    OutOfBasis(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("operator is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("eigendecomposition failed: {0}")]
    Eigen(String),
    #[error("no avoided crossing found in the sweep window [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64 },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("unsupported resonance: {0}")]
    UnsupportedResonance(String),
    #[error("small denominator {value:e} in perturbative sum")]
    SmallDenominator { value: f64 },
    #[error("invalid rates: {0}")]
    InvalidRates(String),
    #[error("invalid pulse: {0}")]
    InvalidPulse(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("protocol error: {0}")]
    Protocol(String),
}

pub type Result<T> = std::result::Result<T, Error>;
