use thiserror::Error;

/// Errors reported by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A combinatorial or dimensional size guard was exceeded.
    #[error("size limit exceeded: {what} is {got}, maximum {max}")]
    SizeLimit {
        what: &'static str,
        got: usize,
        max: usize,
    },

    /// Arguments violate a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A point is outside the domain of an analytic transform.
    #[error("domain error: {0}")]
    Domain(String),

    /// The representation of a measure does not support the request.
    #[error("unsupported representation: {0}")]
    Unsupported(String),

    /// A linear solve, eigendecomposition or quadrature failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Cauchy-integral moment extraction was attempted inside the support.
    #[error("contour radius {radius} too small: coefficients disagree by {discrepancy:e}")]
    Radius { radius: f64, discrepancy: f64 },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
