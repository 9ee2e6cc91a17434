//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A coordinate fell outside the sampled grid.
    #[error("position {z} outside grid range [{min}, {max}]")]
    OutOfRange { z: f64, min: f64, max: f64 },

    /// A sampled grid failed its basic contract (length, monotonicity, finiteness).
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// Two sampled objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// An envelope that must normalize to the cyclicity budget cannot.
    #[error("degenerate envelope: {0}")]
    DegenerateEnvelope(String),

    /// A warp map for reparametrization was not strictly increasing.
    #[error("non-monotone warp: {0}")]
    NonMonotoneWarp(String),

    /// A matrix expected to be unitary exceeded the tolerance.
    #[error("unitarity violated: max |U†U - I| = {defect:.3e} exceeds {tol:.3e}")]
    UnitarityViolation { defect: f64, tol: f64 },

    /// A state vector could not be normalized.
    #[error("degenerate state: {0}")]
    DegenerateState(String),

    /// Propagation refused to run with the requested resolution.
    #[error("step count {steps} too small for {grid_points} grid points (need >= {min_steps})")]
    StepCountTooSmall {
        steps: usize,
        grid_points: usize,
        min_steps: usize,
    },

    /// Non-finite data where finite numbers are required.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A least-squares problem without enough independent data.
    #[error("underdetermined fit: {0}")]
    Underdetermined(String),

    /// A requested geometry cannot be realized on the planar chip.
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    /// Catch-all for invalid parameters with context.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// HOM visibility is undefined when the classical coincidence vanishes.
    #[error("undefined visibility: classical coincidence probability is zero")]
    UndefinedVisibility,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
