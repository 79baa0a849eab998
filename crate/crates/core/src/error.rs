use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("signal too short: length {0} (need at least 2)")]
    TooShort(usize),

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("negative power spectrum value {value} at bin {bin}")]
    NegativeSpectrum { bin: usize, value: f64 },

    #[error("expected a real-valued signal, sample {0} has a nonzero imaginary part")]
    ComplexInput(usize),

    #[error("deformation kind mismatch: expected {expected}, found {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("deformation is not strictly increasing at sample {0}")]
    NonMonotone(usize),

    #[error("warp range [{lo}, {hi}] exceeds the source support [0, {max}]")]
    RangeExceeded { lo: f64, hi: f64, max: f64 },

    #[error("{name} = {value} must divide the signal length {len}")]
    NotDivisor {
        name: &'static str,
        value: usize,
        len: usize,
    },

    #[error("transform has no energy in any column")]
    ZeroTransform,

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("wavelet at scale index {scale} puts {fraction:.3e} of its energy above Nyquist")]
    Aliasing { scale: i64, fraction: f64 },

    #[error("factorization of a {dim}x{dim} covariance failed even with ridge {ridge:e}")]
    Factorization { dim: usize, ridge: f64 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_finite_real(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}
