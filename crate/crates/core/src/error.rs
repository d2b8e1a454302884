use thiserror::Error;

/// Errors raised by the numerical kernels and the recursion engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (relative deviation {deviation:.3e})")]
    NonHermitian { deviation: f64 },

    #[error("matrix is not symmetric (relative deviation {deviation:.3e})")]
    NonSymmetric { deviation: f64 },

    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e}, max eigenvalue {max_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64, max_eig: f64 },

    #[error("matrix is singular to working precision (residual {residual:.3e})")]
    Singular { residual: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("energy {x} lies outside the interior of the band I_D")]
    OutsideBand { x: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size cap exceeded: {size} > {cap}")]
    SizeCap { size: usize, cap: usize },

    #[error("no convergence after depth {depth} (residual {residual:.3e})")]
    NoConvergence { depth: usize, residual: f64 },

    #[error("invariant breach: {0}")]
    InvariantBreach(String),

    #[error("eigenvalue {eigenvalue} lies within {margin:.3e} of the contour")]
    EigenvalueOnContour { eigenvalue: f64, margin: f64 },

    #[error("contour quadrature did not converge ({points} nodes, change {change:.3e})")]
    QuadratureNotConverged { points: usize, change: f64 },

    #[error("range of the projection is not a graph over the block: {reason}")]
    NotAGraph { reason: String },

    #[error("spectral gap violated: eigenvalue {eigenvalue} of the second block lies in ({lo}, {hi})")]
    GapViolation { eigenvalue: f64, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
