use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite integrand value at quadrature node q = {node}")]
    NonFiniteIntegrand { node: f64 },

    #[error("matrix is singular at column {col}: pivot {pivot:e} below threshold {threshold:e}")]
    Singular { col: usize, pivot: f64, threshold: f64 },

    #[error("eigensolver did not converge: {0}")]
    EigsNoConvergence(String),

    #[error("solve rejected: relative residual {residual:e} exceeds {limit:e}")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("solve rejected: mean constraint |<X,U>| = {value:e} exceeds {limit:e}")]
    ConstraintViolation { value: f64, limit: f64 },

    #[error("basis extension too small: {0}")]
    ExtensionTooSmall(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
