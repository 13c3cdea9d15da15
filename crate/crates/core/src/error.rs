use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum GbsError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("unphysical state: {0}")]
    Unphysical(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("non-positive determinant {value:e} for subset {subset:?}")]
    NonPositiveDeterminant { value: f64, subset: Vec<usize> },

    #[error("unsupported route: {0}")]
    Unsupported(String),

    #[error("infeasible scale: {0}")]
    Infeasible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("empty support: {0}")]
    EmptySupport(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, GbsError>;

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> GbsError {
    GbsError::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
