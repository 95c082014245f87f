use thiserror::Error;

use crate::asymptotics::Nonconvergence;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by kernel, channel and model operations.
///
/// Every variant has a stable code (see [`Error::code`]) that is written
/// into reports and returned across the C ABI.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("unknown point `{0}`")]
    UnknownPoint(String),

    #[error("word expands to {count} Kraus strings, limit is {max}")]
    TooManyStrings { count: usize, max: usize },

    #[error("lift of `{label}` is inadmissible: residual {residual:e} exceeds {tol:e}")]
    LiftInadmissible { label: String, residual: f64, tol: f64 },

    #[error("model contractivity certificate failed: {0}")]
    CertificateFailed(String),

    #[error("iteration did not converge: {0}")]
    NotConverged(Box<Nonconvergence>),

    #[error("kernel is not dominated: {0}")]
    NotDominated(String),

    #[error("map `{0}` is not subunital")]
    NotSubunital(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("invalid distribution: {0}")]
    BadDistribution(String),

    #[error("log-norm underflow at step {step}")]
    Underflow { step: usize },

    /// A verified property did not hold on the computed data.
    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("invalid input: {0}")]
    Invalid(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::DimensionMismatch(_) => "ErrDimensionMismatch",
            Error::Numerical(_) => "ErrNumerical",
            Error::NotPsd { .. } => "ErrNotPSD",
            Error::UnknownLabel(_) => "ErrUnknownLabel",
            Error::UnknownPoint(_) => "ErrUnknownPoint",
            Error::TooManyStrings { .. } => "ErrTooManyStrings",
            Error::LiftInadmissible { .. } => "ErrLiftInadmissible",
            Error::CertificateFailed(_) => "ErrCertificateFailed",
            Error::NotConverged(_) => "ErrNotConverged",
            Error::NotDominated(_) => "ErrNotDominated",
            Error::NotSubunital(_) => "ErrNotSubunital",
            Error::PreconditionFailed(_) => "ErrPreconditionFailed",
            Error::BadDistribution(_) => "ErrBadDistribution",
            Error::Underflow { .. } => "ErrUnderflow",
            Error::CheckFailed(_) => "ErrCheckFailed",
            Error::Invalid(_) => "ErrInvalid",
        }
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
