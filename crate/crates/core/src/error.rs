use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("matrix is not a proper rotation: {0}")]
    NotRotation(String),

    #[error("degenerate hypersphere fit: {0}")]
    DegenerateFit(String),

    #[error("victim row {row} is not unit-norm (norm = {norm})")]
    NotUnitNorm { row: usize, norm: f64 },

    #[error("need at least 2 reference scores, got {0}")]
    TooFewReferences(usize),

    #[error("reference scores have zero spread; t-statistic undefined")]
    DegenerateReferences,

    #[error("zero-norm vector: {0}")]
    ZeroNorm(String),

    #[error("singular value decomposition failed: {0}")]
    Svd(String),
}

pub type Result<T> = std::result::Result<T, Error>;
