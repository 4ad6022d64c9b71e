use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("mean vector length {0} is not a positive even number")]
    OddLength(usize),

    #[error("invalid mode indices {modes:?} for {m} modes")]
    InvalidModes { modes: Vec<usize>, m: usize },

    #[error("matrix is not orthogonal (defect {0:e})")]
    NotOrthogonal(f64),

    #[error("matrix is not symmetric (defect {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not skew-symmetric (defect {0:e})")]
    NotSkew(f64),

    #[error("generator does not commute with the symplectic form (defect {0:e})")]
    NotPassive(f64),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositive(f64),

    #[error("trace must vanish, got {0:e}")]
    NonzeroTrace(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("non-finite value at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: &'static str },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
