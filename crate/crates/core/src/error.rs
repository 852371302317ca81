use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid group element: {0}")]
    InvalidGroup(String),

    #[error("type sequences do not match: {0}")]
    TypeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("brute-force guard: type class of size {size} exceeds limit {limit}")]
    ComplexityGuard { size: usize, limit: usize },

    #[error("singular gradient: atoms {i} and {j} are coincident (distance {dist:.3e})")]
    SingularGradient { i: usize, j: usize, dist: f64 },

    #[error("kernel underflow: all kernel values below 1e-300; increase tau (max logit {max_logit:.1})")]
    Underflow { max_logit: f64 },

    #[error("unknown class id: {0}")]
    UnknownClass(String),

    #[error("stale forward cache: {0}")]
    InvalidCache(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
