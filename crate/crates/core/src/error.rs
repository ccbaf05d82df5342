use thiserror::Error;

/// Errors produced by the library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not skew-symmetric (deviation {deviation:.3e} exceeds {tol:.1e})")]
    NotSkewSymmetric { deviation: f64, tol: f64 },

    #[error("matrix is not symmetric (deviation {deviation:.3e} exceeds {tol:.1e})")]
    NotSymmetric { deviation: f64, tol: f64 },

    #[error("matrix is not positive definite: Cholesky pivot {pivot:.3e} at index {index}")]
    SingularMatrix { pivot: f64, index: usize },

    #[error("rank-deficient pushed covariance for class {class}: smallest eigenvalue ratio {ratio:.3e}")]
    RankDeficient { class: usize, ratio: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid source: {0}")]
    InvalidSource(String),

    #[error("non-finite entry at ({row},{col})")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("trial {trial} failed twice: {detail}")]
    TrialFailed { trial: usize, detail: String },

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
