use thiserror::Error;

/// Errors raised by the numerical pipeline.
///
/// Every variant maps onto one of the coarse kinds reported by [`Error::kind`],
/// which the command-line driver turns into exit codes.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow in exponential tower at stage {stage}: exponent {exponent} exceeds cap")]
    Overflow { stage: usize, exponent: f64 },

    #[error("exponent {log_value} exceeds cap {cap}")]
    ExponentCap { log_value: f64, cap: f64 },

    #[error("precision budget exceeded: {0}")]
    Precision(String),

    #[error("no zero crossing before t = {t_limit} (last u = {last_u})")]
    NonTermination { t_limit: f64, last_u: f64 },

    #[error("bracketing error: {0}")]
    Bracketing(String),

    #[error("invalid model spec at column {position} ({fragment:?}): {message}")]
    Spec {
        position: usize,
        fragment: String,
        message: String,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    /// Coarse machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::Overflow { .. } | Error::ExponentCap { .. } | Error::Precision(_) => "precision",
            Error::NonTermination { .. } => "non-termination",
            Error::Bracketing(_) => "bracketing",
            Error::Spec { .. } => "spec",
            Error::Internal(_) => "internal",
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
