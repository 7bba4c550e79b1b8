//! Error type shared by every pricing route.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PricingError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    /// A model or contract parameter is outside its admissible range.
    /// `field` is the dotted path of the offending value, e.g. `bounds.d0`.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    /// A control path does not satisfy the cumulative-weight constraint.
    #[error("inadmissible control: {0}")]
    Admissibility(String),

    /// Solver or run configuration is inconsistent (grid, method/spec mismatch).
    #[error("configuration error in `{field}`: {reason}")]
    Configuration { field: String, reason: String },

    /// A non-finite value appeared during a backward sweep.
    #[error("numerical failure at time slice {slice}: {reason}")]
    NumericalFailure { slice: usize, reason: String },

    /// A query fell outside the convex hull of the grid.
    #[error("extrapolation requested: {0}")]
    Extrapolation(String),

    /// The requested closed form does not apply to this contract.
    #[error("closed form refused: {0}")]
    Refused(String),
}

impl PricingError {
    pub fn param(field: impl Into<String>, reason: impl Into<String>) -> Self {
        PricingError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        PricingError::Configuration {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Dotted field path for parameter and configuration errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            PricingError::InvalidParameter { field, .. }
            | PricingError::Configuration { field, .. } => Some(field),
            _ => None,
        }
    }
}
