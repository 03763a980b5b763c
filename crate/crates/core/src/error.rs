use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DsltError {
    /// A parameter is outside its mathematical domain.
    #[error("invalid {field}: {reason}")]
    Domain { field: &'static str, reason: String },

    /// A Gaussian quadratic form is not positive definite (lambda*rho - mu^2 <= 0).
    #[error("degenerate covariance: lambda*rho - mu^2 = {det:e}")]
    Degenerate { det: f64 },

    /// The Cholesky fallback met a pivot that is not positive beyond tolerance.
    #[error("covariance matrix is not positive definite (pivot {index}: {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// A path does not live on the grid that the model configuration expects.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Adaptive quadrature failed to meet its tolerance within the budget.
    #[error("quadrature did not converge: value {value:e}, error estimate {error:e}, {evals} evaluations")]
    NonConvergence { value: f64, error: f64, evals: u64 },

    /// A log-log fit cannot be performed on the supplied moments.
    #[error("degenerate fit: {0}")]
    FitDegenerate(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error("malformed path file: {0}")]
    Format(String),
}

impl DsltError {
    pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> Self {
        DsltError::Domain { field, reason: reason.into() }
    }
}

impl From<std::io::Error> for DsltError {
    fn from(e: std::io::Error) -> Self {
        DsltError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DsltError>;
