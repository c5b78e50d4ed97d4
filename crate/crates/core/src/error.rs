use thiserror::Error;

/// Failure modes shared across the core crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid reflection model: {0}")]
    InvalidModel(&'static str),
    #[error("circuit model requires circuit parameters")]
    MissingCircuitParams,
    #[error("correlation coefficient {0} outside [0, 1)")]
    InvalidPsi(f64),
    #[error("invalid dimensions: {0}")]
    InvalidDims(&'static str),
    #[error("dimension mismatch in {context}: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        context: &'static str,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("Gram matrix is numerically singular (condition estimate {condition:e})")]
    SingularGram { condition: f64 },
    #[error("training gradient vanished for UE {ue}")]
    ZeroGradient { ue: usize },
    #[error("group size {rho} does not divide element count {m}")]
    InvalidGrouping { m: usize, rho: usize },
    #[error("reflection pattern last row must be all ones")]
    DirectRowNotOnes,
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
