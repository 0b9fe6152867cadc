use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("starting point outside the domain closure: {0}")]
    StartOutsideDomain(String),

    #[error("projection did not converge after {iterations} sweeps (residual {residual:e})")]
    ProjectionNonConvergence { iterations: usize, residual: f64 },

    #[error("time {t} outside [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid driver: {0}")]
    InvalidDriver(String),

    #[error("invalid coefficients: {0}")]
    InvalidCoefficients(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("integration failed at delta={delta}, path seed={seed}: {source}")]
    StudyFailure {
        delta: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Errors caused by the domain or by a path leaving it.
    pub fn is_domain_error(&self) -> bool {
        matches!(self, Error::InvalidDomain(_) | Error::StartOutsideDomain(_))
    }

    /// Failures raised by the numerics rather than by the inputs.
    pub fn is_numeric_failure(&self) -> bool {
        match self {
            Error::ProjectionNonConvergence { .. } => true,
            Error::StudyFailure { .. } => true,
            _ => false,
        }
    }
}
