use thiserror::Error;

/// Error type for all fallible operations in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),

    #[error("matrix has non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("matrix is not symmetric: |m[{i}][{j}] - m[{j}][{i}]| = {gap:e} exceeds tolerance")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("matrix is singular or not positive definite (pivot {0:e})")]
    NotPositiveDefinite(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("constraint matrix has full rank; nothing to reduce")]
    FullRank,

    #[error("constraint matrix is rank deficient (rank {rank} < dim {dim}); reduce the instance first")]
    RankDeficient { rank: usize, dim: usize },

    #[error("trailing noise block is numerically singular during rank reduction")]
    SingularBlock,

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("solver did not certify a KKT point after {restarts} restarts (best residual {residual:e})")]
    NotCertified { restarts: usize, residual: f64 },

    #[error("null spaces of K and S-K overlap (alignment {0:e}); multiplier recovery is ambiguous")]
    DegenerateGeometry(f64),

    #[error("mixture density underflows at the query point (nearest component {0:.3} standard deviations away)")]
    DensityUnderflow(f64),

    #[error("invalid mixture: {0}")]
    InvalidMixture(String),

    #[error("quadrature failed to converge within the refinement cap (error estimate {0:e})")]
    QuadratureCap(f64),

    #[error("infeasible candidate: covariance exceeds the constraint (margin {0:e})")]
    InfeasibleCandidate(f64),

    #[error("entropy-matching search failed: {0}")]
    MatchingFailed(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("not enough samples: have {have}, need at least {need}")]
    TooFewSamples { have: usize, need: usize },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
