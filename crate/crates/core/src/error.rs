use thiserror::Error;

use crate::point::Point;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point {0} lies outside the metric domain")]
    OutsideDomain(Point),
    #[error("stencil around {point} leaves the domain even after shrinking the step to {step:e}")]
    StencilOutOfDomain { point: Point, step: f64 },
    #[error("non-finite value at {0}")]
    NonFinite(Point),
    #[error("degenerate metric at {0}")]
    SingularMetric(Point),
    #[error("slot {slot} out of range for a rank-{rank} tensor")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("contraction needs two distinct slots of a tensor of rank >= 2 (rank {0})")]
    RankTooLow(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("tensor lacks curvature symmetries (residual {0:e})")]
    Asymmetric(f64),
    #[error("unknown metric `{0}`")]
    UnknownMetric(String),
    #[error("unknown quantity `{0}`")]
    UnknownQuantity(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },
    #[error("quadrature error estimate {estimate:e} exceeds threshold {threshold:e}")]
    QuadratureNotConverged { estimate: f64, threshold: f64 },
    #[error("numerical inconsistency: {0}")]
    Inconsistent(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
