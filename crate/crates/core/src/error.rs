use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("jet order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("jet order exhausted: need {needed}, have {available}")]
    OrderExhausted { needed: usize, available: usize },

    #[error("singular input: {0}")]
    Singular(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("point is not immersed: relative Gram determinant {gram_det:e} below floor")]
    NotImmersed { gram_det: f64 },

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("degree mismatch: {0}")]
    DegreeMismatch(String),

    #[error("non-finite integrand at node {node} (x = {coords:?})")]
    PoisonedIntegrand { node: usize, coords: [f64; 4] },

    #[error("rejected transform: {0}")]
    RejectedTransform(String),

    #[error("unsupported case: {0}")]
    Unsupported(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),
}

pub type Result<T> = std::result::Result<T, Error>;
