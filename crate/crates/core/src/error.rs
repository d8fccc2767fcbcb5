use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not Hermitian/symmetric (max asymmetry {asymmetry:.3e})")]
    NotHermitian { asymmetry: f64 },

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("correlation coefficient {value} is too close to +/-1")]
    NearSingularCorrelation { value: f64 },

    #[error("unsupported receive antenna count m = {0} (supported: 1..=6)")]
    UnsupportedAntennaCount(usize),

    #[error("covariance perturbation rejected {attempts} times in a row (rho too large?)")]
    PerturbationRejected { attempts: usize },

    #[error("{what}: trace expressions disagree ({first} vs {second})")]
    TraceMismatch {
        what: &'static str,
        first: f64,
        second: f64,
    },

    #[error("coherence matrix lacks the circular (complex-embedding) structure")]
    NotCircular,

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("sign pattern not covered by the detector tables")]
    UnknownPattern,

    #[error("table file error: {0}")]
    TableFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
