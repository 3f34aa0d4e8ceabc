use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by mesh loading, scene parsing, and the solvers.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("duplicate node {index}")]
    DuplicateNode { index: usize },

    #[error("inverted element {index}")]
    InvertedElement { index: usize },

    #[error("non-manifold boundary at face {face:?}")]
    NonManifoldBoundary { face: [usize; 3] },

    #[error("invalid scene config: {0}")]
    InvalidConfig(String),

    #[error("coincident primitives (zero distance): interior-point violation")]
    CoincidentPrimitives,

    #[error("distance {d} <= 0 for active pair: interior-point violation")]
    InteriorViolation { d: f64 },

    #[error("non-finite value in nodal positions")]
    NonFinitePositions,

    #[error("CCD called with infeasible start (d <= 0)")]
    InfeasibleCcdStart,

    #[error("index {index} out of range ({len} entries)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("optimizer failed to converge after {iterations} iterations (residual ratio {residual_ratio:.3e})")]
    NonConvergence {
        iterations: usize,
        residual_ratio: f64,
    },

    #[error("line search failed (step length {alpha:.3e} below 1e-9)")]
    LineSearchFailure { alpha: f64 },

    #[error("{0}")]
    Invalid(String),
}
