//! Numerical machinery for extremal entropy optimization under covariance
//! constraints, with the broadcast-channel and source-coding rate
//! computations that motivate it.
//!
//! The central object is the nonconvex matrix program
//!
//! ```text
//! maximize   h(X + Z1) - mu * h(X + Z2)
//! subject to Cov(X) <= S        (Löwner order)
//! ```
//!
//! with `Z1`, `Z2` Gaussian. The crate provides:
//!
//! - [`matrix`]: symmetric-matrix primitives (PSD tests, Löwner comparisons,
//!   log-determinants, square roots) and the reduction of rank-deficient
//!   constraint matrices to full-rank instances.
//! - [`solver`]: the Gaussian-restricted optimizer with KKT multiplier
//!   recovery, residual certification, and a concavity check of the optimal
//!   value in the constraint matrix.
//! - [`enhance`]: noise-covariance enhancement absorbing the KKT multipliers,
//!   plus the ordering / proportionality / value-equality identities it must
//!   satisfy.
//! - [`fisher`]: score functions and Fisher information matrices of Gaussian
//!   mixtures; Cramér-Rao, Fisher information inequality, Stein identity and
//!   de Bruijn identity checks.
//! - [`entropy`]: differential entropy by exact formula, adaptive quadrature,
//!   control-variate Monte Carlo, and a k-nearest-neighbor estimator.
//! - [`verify`]: statistical validation of Gaussian optimality against
//!   non-Gaussian candidate families, the covariance-preserving perturbation
//!   path, the worst-additive-noise comparison, and the degraded-case
//!   counterexample construction.
//! - [`capacity`]: two-user vector Gaussian broadcast-channel weighted sum
//!   rates and region sweep, and distributed-source-coding rate bounds with
//!   distortion-constraint bite detection.
//!
//! All entropies, rates and objectives are in nats internally. Estimators are
//! deterministic given a seed: work items carry fixed stream indices and
//! accumulate in index order, so results are bit-identical across thread
//! counts (see [`exec`]).

pub mod capacity;
pub mod enhance;
pub mod entropy;
pub mod error;
pub mod exec;
pub mod fisher;
pub mod knn;
pub mod matrix;
pub mod mixture;
pub mod opt;
pub mod quad;
pub mod reduce;
pub mod report;
pub mod solver;
pub mod verify;

pub use nalgebra;

pub use error::{Error, Result};
pub use matrix::SymMatrix;
pub use mixture::GaussianMixture;
pub use solver::{ExtremalInstance, KktSolution, SolverConfig};

/// ln(2*pi*e), the constant in the Gaussian entropy formula.
pub const LN_2PIE: f64 = 2.837877066409345;
