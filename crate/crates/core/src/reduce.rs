//! Reduction of instances with a rank-deficient constraint matrix.
//!
//! When `S` has rank `r < n`, any admissible `X` is supported on the range of
//! `S`. Rotating by the eigenbasis `Q` of `S` and decorrelating each noise
//! vector's in-range block from its out-of-range block turns the problem into
//! an equivalent full-rank instance of dimension `r` plus constant entropy
//! offsets from the discarded noise blocks:
//!
//! ```text
//! h(X + Zi) = h(X_a + Z̄_{i,a}) + h(Z̄_{i,b})
//! ```
//!
//! with reduced noise covariance `A_i - B_iᵀ C_i⁻¹ B_i` (a Schur complement)
//! and offset `h(Z̄_{i,b}) = (1/2) log((2 pi e)^{n-r} |C_i|)`.

use crate::error::{Error, Result};
use crate::matrix::{logdet, SymMatrix};
use crate::solver::ExtremalInstance;
use crate::LN_2PIE;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Outcome of reducing a rank-deficient instance.
#[derive(Debug, Clone)]
pub struct RankReduction {
    /// Numerical rank `r` of the constraint matrix.
    pub reduced_dim: usize,
    /// Orthogonal eigenbasis of `S` (columns; first `r` span the range).
    pub basis: DMatrix<f64>,
    /// Block decorrelators for the two noise covariances, `n x n`.
    pub decorrelators: (DMatrix<f64>, DMatrix<f64>),
    /// Entropy of the discarded noise blocks, nats.
    pub entropy_offsets: (f64, f64),
    /// The equivalent full-rank instance of dimension `r`.
    pub reduced_instance: ExtremalInstance,
}

/// Serializable summary (the dense basis/decorrelators stay in memory).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankReductionSummary {
    pub reduced_dim: usize,
    pub entropy_offset_1_nats: f64,
    pub entropy_offset_2_nats: f64,
    pub reduced_instance: ExtremalInstance,
}

impl RankReduction {
    pub fn summary(&self) -> RankReductionSummary {
        RankReductionSummary {
            reduced_dim: self.reduced_dim,
            entropy_offset_1_nats: self.entropy_offsets.0,
            entropy_offset_2_nats: self.entropy_offsets.1,
            reduced_instance: self.reduced_instance.clone(),
        }
    }
}

/// Reduce an instance whose `S` is PSD with numerical rank `r < n`.
///
/// Errors when `S` already has full rank or when a trailing noise block is
/// numerically singular.
pub fn reduce_rank_deficient(inst: &ExtremalInstance) -> Result<RankReduction> {
    let n = inst.dim();
    let (vals, vecs) = inst.s.eigen(); // ascending
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let r = inst.s.numerical_rank();
    if r == n {
        return Err(Error::FullRank);
    }

    // basis with the range of S first: descending eigenvalue order
    let mut basis = DMatrix::zeros(n, n);
    let mut lambdas = Vec::with_capacity(r);
    for j in 0..n {
        let src = n - 1 - j;
        basis.set_column(j, &vecs.column(src));
        if j < r {
            lambdas.push(vals[src].max(0.0));
        }
    }
    let _ = scale;

    let mut reduced_noise = Vec::with_capacity(2);
    let mut decorrelators = Vec::with_capacity(2);
    let mut offsets = Vec::with_capacity(2);
    for kz in [&inst.kz1, &inst.kz2] {
        let t = kz.congruence(&basis); // Qᵀ Kz Q
        let td = t.to_dmatrix();
        let a = td.view((0, 0), (r, r)).into_owned();
        let b = td.view((r, 0), (n - r, r)).into_owned();
        let c = td.view((r, r), (n - r, n - r)).into_owned();
        let c_sym = SymMatrix::from_dmatrix(&c);
        let c_inv = c_sym.inverse_pd().map_err(|_| Error::SingularBlock)?;
        let schur = &a - b.transpose() * c_inv.to_dmatrix() * &b;
        reduced_noise.push(SymMatrix::from_dmatrix(&schur));

        let mut d = DMatrix::identity(n, n);
        let corr = -b.transpose() * c_inv.to_dmatrix();
        for i in 0..r {
            for j in 0..(n - r) {
                d[(i, r + j)] = corr[(i, j)];
            }
        }
        decorrelators.push(d);

        let off = 0.5 * ((n - r) as f64 * LN_2PIE + logdet(&c_sym)?);
        offsets.push(off);
    }

    let reduced_instance = ExtremalInstance::new(
        reduced_noise[0].clone(),
        reduced_noise[1].clone(),
        SymMatrix::diagonal(&lambdas),
        inst.mu,
    )?;

    Ok(RankReduction {
        reduced_dim: r,
        basis,
        decorrelators: (decorrelators.remove(0), decorrelators.remove(0)),
        entropy_offsets: (offsets[0], offsets[1]),
        reduced_instance,
    })
}

/// Verify the basis is orthogonal: ||QᵀQ - I||_F.
pub fn basis_orthogonality_defect(red: &RankReduction) -> f64 {
    let n = red.basis.nrows();
    (red.basis.transpose() * &red.basis - DMatrix::identity(n, n)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::gaussian_objective;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diag_example_reduces_to_scalar() {
        let inst = ExtremalInstance::new(
            SymMatrix::identity(2),
            SymMatrix::identity(2).scale(2.0),
            SymMatrix::diagonal(&[1.0, 0.0]),
            2.0,
        )
        .unwrap();
        let red = reduce_rank_deficient(&inst).unwrap();
        assert_eq!(red.reduced_dim, 1);
        assert_abs_diff_eq!(red.reduced_instance.kz1.get(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(red.reduced_instance.kz2.get(0, 0), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(red.reduced_instance.s.get(0, 0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(red.entropy_offsets.0, 1.418939, epsilon = 1e-6);
        assert_abs_diff_eq!(red.entropy_offsets.1, 1.765512, epsilon = 1e-6);
        assert!(basis_orthogonality_defect(&red) < 1e-12);
    }

    #[test]
    fn full_rank_is_an_error() {
        let inst = ExtremalInstance::scalar(1.0, 2.0, 1.0, 2.0).unwrap();
        assert!(matches!(reduce_rank_deficient(&inst), Err(Error::FullRank)));
    }

    #[test]
    fn correlated_noise_gives_schur_complement() {
        let kz1 = SymMatrix::from_rows(2, &[1.0, 0.5, 0.5, 1.0]).unwrap();
        let inst = ExtremalInstance::new(
            kz1,
            SymMatrix::identity(2).scale(2.0),
            SymMatrix::diagonal(&[1.0, 0.0]),
            2.0,
        )
        .unwrap();
        let red = reduce_rank_deficient(&inst).unwrap();
        assert_abs_diff_eq!(red.reduced_instance.kz1.get(0, 0), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn objective_equivalence_on_range_supported_gaussians() {
        // X supported on range(S): original objective equals the reduced
        // objective plus offsets, for several Gaussian candidates.
        let kz1 = SymMatrix::from_rows(3, &[2.0, 0.3, -0.1, 0.3, 1.5, 0.2, -0.1, 0.2, 1.0]).unwrap();
        let kz2 = SymMatrix::from_rows(3, &[3.0, -0.2, 0.4, -0.2, 2.5, 0.1, 0.4, 0.1, 2.0]).unwrap();
        // rank-2 S aligned with a rotated basis
        let q = nalgebra::DMatrix::from_row_slice(
            3,
            3,
            &[
                0.8, -0.6, 0.0, //
                0.6, 0.8, 0.0, //
                0.0, 0.0, 1.0,
            ],
        );
        let s = SymMatrix::from_dmatrix(
            &(&q * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
                2.0, 1.0, 0.0,
            ])) * q.transpose()),
        );
        let inst = ExtremalInstance::new(kz1, kz2, s, 1.6).unwrap();
        let red = reduce_rank_deficient(&inst).unwrap();

        for t in [0.2f64, 0.5, 0.9] {
            // reduced-space covariance, mapped to the original space
            let k_red = red.reduced_instance.s.scale(t);
            let mut lift = nalgebra::DMatrix::zeros(3, 3);
            lift.view_mut((0, 0), (2, 2)).copy_from(&k_red.to_dmatrix());
            let k_orig = SymMatrix::from_dmatrix(&(&red.basis * lift * red.basis.transpose()));

            let direct = {
                // dims with zero variance need the reduction identity; evaluate
                // entropies blockwise instead: h(X + Zi) with X singular is
                // still finite since Zi is full rank.
                let n = 3.0;
                let d1 = crate::matrix::logdet(&k_orig.add(&inst.kz1)).unwrap();
                let d2 = crate::matrix::logdet(&k_orig.add(&inst.kz2)).unwrap();
                0.5 * (n * crate::LN_2PIE + d1) - 0.5 * inst.mu * (n * crate::LN_2PIE + d2)
            };
            let reduced = gaussian_objective(&k_red, &red.reduced_instance).unwrap()
                + red.entropy_offsets.0
                - inst.mu * red.entropy_offsets.1;
            assert_abs_diff_eq!(direct, reduced, epsilon = 1e-8);
        }
    }
}
