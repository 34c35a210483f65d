use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative routine failed to reach its tolerance.
    #[error("numerical error: {what} (residual {residual:e})")]
    Numerical { what: String, residual: f64 },

    /// A user-supplied function produced a non-finite value.
    #[error("evaluation error: function is not finite at eigenvalue {lambda}")]
    Evaluation { lambda: f64 },

    /// `z(s)` does not exceed the largest eigenvalue, so `ln(z(s) − λ)` is undefined.
    #[error("domain error: z(s) = {z} does not exceed the largest eigenvalue {lambda_max}; the test is undefined")]
    AboveSupport { z: f64, lambda_max: f64 },

    /// The caller violated a documented precondition on its inputs.
    #[error("contract violation: {0}")]
    Contract(String),

    /// The radius law does not satisfy the fourth-moment condition.
    #[error("non-conforming radius law: {0}")]
    NonConforming(String),

    /// Malformed or unusable input data.
    #[error("input error: {0}")]
    Input(String),

    /// A requested size cannot be allocated.
    #[error("resource error: {0}")]
    Resource(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for failures of an iterative or numerical kernel, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. } | Error::Evaluation { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
