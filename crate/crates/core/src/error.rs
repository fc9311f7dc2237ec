use crate::expr::{EvalError, ParseError};
use crate::geometry::Point2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate triangle")]
    DegenerateTriangle,

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("non-finite value at ({}, {})", .0.x1, .0.x2)]
    NonFinite(Point2),

    #[error("duplicate points at indices {0:?}")]
    DuplicatePoints(Vec<(usize, usize)>),

    #[error("all points are collinear")]
    Collinear,

    #[error("point {index} at ({}, {}) lies outside the domain", .point.x1, .point.x2)]
    PointOutsideDomain { index: usize, point: Point2 },

    #[error("domain vertex {0} is not among the input points")]
    MissingDomainVertex(usize),

    #[error("inadmissible: {0}")]
    Inadmissible(String),

    #[error("divergence undefined at degenerate control volume (node {0})")]
    DegenerateControlVolume(usize),

    #[error("support mismatch: {0}")]
    SupportMismatch(String),

    #[error("coefficient {name} = {value} violates the positive lower bound at ({}, {})", .at.x1, .at.x2)]
    CoefficientBound {
        name: &'static str,
        value: f64,
        at: Point2,
    },

    #[error("matrix not positive definite (row {0})")]
    NotPositiveDefinite(usize),

    #[error("solver did not converge: {iterations} iterations, relative residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
