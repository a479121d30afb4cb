use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown factor label `{0}`")]
    UnknownFactor(String),
    #[error("duplicate factor label `{0}`")]
    DuplicateFactor(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("operator is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
    #[error("index {index} out of range for factor of dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state support touches the grid boundary: {0}")]
    BoundaryContact(String),
    #[error("singular operator: {0}")]
    Singular(String),
    #[error("non-finite amplitudes after propagation at t = {0}")]
    NonFinite(f64),
    #[error("pulse is not differentiable: {0}")]
    NotDifferentiable(String),
    #[error("crossing not found: {0}")]
    CrossingNotFound(String),
    #[error("too few samples: {0}")]
    TooFewSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;
