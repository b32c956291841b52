use thiserror::Error;

/// Failure modes of the core library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("point ({x}, {y}) lies outside the open unit disk")]
    PointOutsideDisk { x: f64, y: f64 },

    #[error("möbius matrix violates |a|^2 - |b|^2 = 1 by {defect:.3e}")]
    NotUnitDeterminant { defect: f64 },

    #[error("group self-check failed: relation residual {residual:.3e} exceeds {limit:.1e}")]
    RelationCheck { residual: f64, limit: f64 },

    #[error("point ({x}, {y}) not reducible to the fundamental domain within {budget} steps")]
    OutOfCollar { x: f64, y: f64, budget: usize },

    #[error("grid step h = {h} out of range (need 0 < h <= {max})")]
    BadStep { h: f64, max: f64 },

    #[error("ghost node at ({x}, {y}): no interpolation block of solved nodes covers its reduced point")]
    GhostBlock { x: f64, y: f64 },

    #[error("field length {got} does not match grid ({expected} nodes)")]
    FieldLength { got: usize, expected: usize },

    #[error("interpolation point ({x}, {y}) is outside the gridded region")]
    OutsideGrid { x: f64, y: f64 },

    #[error("basis coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { got: usize, expected: usize },

    #[error("linear solve failed: {reason}")]
    LinearSolve { reason: String },

    #[error("newton iteration stalled after {iterations} steps (best residual {best_residual:.3e})")]
    NonConvergence {
        iterations: usize,
        best_residual: f64,
        /// Residual norms of every accepted iterate, for diagnosis.
        history: Vec<f64>,
        /// Best iterate reached, so callers can restart or inspect it.
        best: Box<crate::grid::ScalarField>,
    },

    #[error("continuation could not pass amplitude {amplitude} (bisection depth {depth} exhausted)")]
    ContinuationStuck { amplitude: f64, depth: usize },

    #[error("metric not positive definite at node {node} (det = {det:.3e})")]
    NotPositiveDefinite { node: usize, det: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}
