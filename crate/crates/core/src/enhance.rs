//! Noise enhancement: absorb the KKT multipliers of a certified optimizer
//! into smaller noise covariances,
//!
//! ```text
//! (1/2)(K* + Kz1)^{-1} + M1 = (1/2)(K* + K~z1)^{-1}
//! (mu/2)(K* + Kz2)^{-1} + M2 = (mu/2)(K* + K~z2)^{-1}
//! ```
//!
//! together with the constant that keeps the auxiliary objective comparable,
//!
//! ```text
//! F = h(Z1) - h(~Z1) + mu (h(Xs + ~Z2) - h(Xs + Z2)),  Cov(Xs) = S.
//! ```
//!
//! The enhanced pair satisfies the orderings `0 ⪯ K~z1 ⪯ Kz1` and
//! `K~z1 ⪯ K~z2 ⪯ Kz2`, the proportionality
//! `K* + K~z1 = (mu-1)^{-1}(K~z2 - K~z1)` for `mu > 1` (which is exactly the
//! equality condition of the entropy-power inequality for `X* + ~Z1` against
//! `~Z = ~Z2 - ~Z1`), and value equality between the original and auxiliary
//! objectives at the optimizer. Each identity has its own check operation
//! reporting margins.

use crate::error::{Error, Result};
use crate::matrix::{logdet, SymMatrix};
use crate::solver::{gaussian_objective, ExtremalInstance, KktSolution};
use crate::LN_2PIE;
use serde::{Deserialize, Serialize};

/// Enhanced noise covariances plus the auxiliary-objective constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnhancedInstance {
    pub ktz1: SymMatrix,
    pub ktz2: SymMatrix,
    /// Constant added to the auxiliary objective, nats.
    pub f_nats: f64,
    pub base: ExtremalInstance,
    pub sol: KktSolution,
}

/// Build the enhanced instance from a certified solution.
pub fn enhance(inst: &ExtremalInstance, sol: &KktSolution) -> Result<EnhancedInstance> {
    if inst.mu < 1.0 {
        return Err(Error::Precondition(
            "enhancement is defined for mu >= 1".into(),
        ));
    }
    let residual = crate::solver::kkt_residual(sol, inst);
    if residual > 1e-6 {
        return Err(Error::Precondition(format!(
            "solution is not certified (KKT residual {residual:e}); enhancement would inherit the defect"
        )));
    }
    let kx = &sol.kx;
    // K~z1 = [ (K* + Kz1)^{-1} + 2 M1 ]^{-1} - K*
    let lhs1 = kx
        .add(&inst.kz1)
        .inverse_pd()?
        .add(&sol.m1.scale(2.0));
    let ktz1 = lhs1.inverse_pd()?.sub(kx).clip_tiny_negatives();
    // K~z2 = (mu/2) [ (mu/2)(K* + Kz2)^{-1} + M2 ]^{-1} - K*
    let lhs2 = kx
        .add(&inst.kz2)
        .inverse_pd()?
        .scale(0.5 * inst.mu)
        .add(&sol.m2);
    let ktz2 = lhs2
        .inverse_pd()?
        .scale(0.5 * inst.mu)
        .sub(kx)
        .clip_tiny_negatives();

    // F uses exact Gaussian entropies only
    let f_nats = 0.5 * (logdet(&inst.kz1)? - logdet(&ktz1)?)
        + 0.5 * inst.mu * (logdet(&inst.s.add(&ktz2))? - logdet(&inst.s.add(&inst.kz2))?);

    Ok(EnhancedInstance {
        ktz1,
        ktz2,
        f_nats,
        base: inst.clone(),
        sol: sol.clone(),
    })
}

impl SymMatrix {
    /// Clip eigenvalues in `(-1e-10 * scale, 0)` to zero; roundoff guard for
    /// matrices that are PSD analytically.
    fn clip_tiny_negatives(&self) -> SymMatrix {
        let min = self.min_eigenvalue();
        let scale = self.trace().abs().max(1.0);
        if min >= 0.0 || min < -1e-10 * scale {
            self.clone()
        } else {
            self.clip_psd()
        }
    }
}

/// Margins of the four enhancement orderings (smallest eigenvalues).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderingsReport {
    /// min eig of K~z1
    pub ktz1_psd: f64,
    /// min eig of Kz1 - K~z1
    pub kz1_minus_ktz1: f64,
    /// min eig of K~z2 - K~z1
    pub ktz2_minus_ktz1: f64,
    /// min eig of Kz2 - K~z2
    pub kz2_minus_ktz2: f64,
    pub pass: bool,
}

pub fn check_orderings(e: &EnhancedInstance, tol: f64) -> OrderingsReport {
    let m1 = e.ktz1.min_eigenvalue();
    let m2 = e.base.kz1.sub(&e.ktz1).min_eigenvalue();
    let m3 = e.ktz2.sub(&e.ktz1).min_eigenvalue();
    let m4 = e.base.kz2.sub(&e.ktz2).min_eigenvalue();
    OrderingsReport {
        ktz1_psd: m1,
        kz1_minus_ktz1: m2,
        ktz2_minus_ktz1: m3,
        kz2_minus_ktz2: m4,
        pass: m1 >= -tol && m2 >= -tol && m3 >= -tol && m4 >= -tol,
    }
}

/// Proportionality of the enhanced optimum with the difference noise
/// `~Z = ~Z2 - ~Z1`, plus the entropy identity it implies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProportionalityReport {
    /// `||K* + K~z1 - (mu-1)^{-1}(K~z2 - K~z1)||_F`
    pub residual: f64,
    /// `|h(X* + ~Z1) - (h(~Z) - (n/2) log(mu-1))|`
    pub entropy_identity_gap: f64,
    pub pass: bool,
}

pub fn check_proportionality(e: &EnhancedInstance, tol: f64) -> Result<ProportionalityReport> {
    let mu = e.base.mu;
    if mu <= 1.0 {
        return Err(Error::Precondition(
            "proportionality requires mu > 1 (at mu = 1 the auxiliary objective is constant)"
                .into(),
        ));
    }
    let n = e.base.dim() as f64;
    let lhs = e.sol.kx.add(&e.ktz1);
    let ktz = e.ktz2.sub(&e.ktz1);
    let residual = lhs.sub(&ktz.scale(1.0 / (mu - 1.0))).frobenius_norm();

    let h_left = 0.5 * (n * LN_2PIE + logdet(&lhs)?);
    let h_ktz = 0.5 * (n * LN_2PIE + logdet(&ktz)?);
    let entropy_identity_gap = (h_left - (h_ktz - 0.5 * n * (mu - 1.0).ln())).abs();
    Ok(ProportionalityReport {
        residual,
        entropy_identity_gap,
        pass: residual <= tol && entropy_identity_gap <= tol,
    })
}

/// Value equality between the original and enhanced objectives at the
/// optimizer, via the two matrix identities and the scalar objective gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueEqualityReport {
    /// `||(K*+K~z1)^{-1} K~z1 - (K*+Kz1)^{-1} Kz1||_F`
    pub residual_noise1: f64,
    /// `||(K*+K~z2)^{-1}(S+K~z2) - (K*+Kz2)^{-1}(S+Kz2)||_F`
    pub residual_noise2: f64,
    /// `|objective_aux(X*) - objective(X*)|` where the auxiliary objective
    /// includes F.
    pub objective_gap: f64,
    pub pass: bool,
}

pub fn check_value_equality(e: &EnhancedInstance, tol: f64) -> Result<ValueEqualityReport> {
    let kx = &e.sol.kx;
    let a1 = kx.add(&e.ktz1).inverse_pd()?.mul_general(&e.ktz1);
    let b1 = kx.add(&e.base.kz1).inverse_pd()?.mul_general(&e.base.kz1);
    let residual_noise1 = (a1 - b1).norm();

    let s = &e.base.s;
    let a2 = kx
        .add(&e.ktz2)
        .inverse_pd()?
        .mul_general(&s.add(&e.ktz2));
    let b2 = kx
        .add(&e.base.kz2)
        .inverse_pd()?
        .mul_general(&s.add(&e.base.kz2));
    let residual_noise2 = (a2 - b2).norm();

    let objective_gap = (auxiliary_objective(e, kx)? - gaussian_objective(kx, &e.base)?).abs();
    Ok(ValueEqualityReport {
        residual_noise1,
        residual_noise2,
        objective_gap,
        pass: residual_noise1 <= tol && residual_noise2 <= tol && objective_gap <= tol,
    })
}

/// Auxiliary objective `h(X + ~Z1) - mu h(X + ~Z2) + F` for Gaussian `X` of
/// covariance `kx`, exact.
pub fn auxiliary_objective(e: &EnhancedInstance, kx: &SymMatrix) -> Result<f64> {
    let n = e.base.dim() as f64;
    let h1 = 0.5 * (n * LN_2PIE + logdet(&kx.add(&e.ktz1))?);
    let h2 = 0.5 * (n * LN_2PIE + logdet(&kx.add(&e.ktz2))?);
    Ok(h1 - e.base.mu * h2 + e.f_nats)
}

/// Entropy-power equality at the enhanced optimum: for `mu > 1`,
/// `X* + ~Z1` and `~Z = ~Z2 - ~Z1` are proportional Gaussians, so the
/// entropy-power inequality for their sum is tight. Returns the relative gap
/// `|N(sum) - N(a) - N(b)| / N(sum)` with `N(X) = exp(2 h(X)/n)`.
pub fn epi_tightness_gap(e: &EnhancedInstance) -> Result<f64> {
    if e.base.mu <= 1.0 {
        return Err(Error::Precondition("requires mu > 1".into()));
    }
    let n = e.base.dim() as f64;
    let a = e.sol.kx.add(&e.ktz1);
    let b = e.ktz2.sub(&e.ktz1);
    let npow = |k: &SymMatrix| -> Result<f64> { Ok((logdet(k)? / n).exp()) };
    let sum = npow(&a.add(&b))?;
    let gap = (sum - npow(&a)? - npow(&b)?).abs() / sum;
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve, SolverConfig};
    use approx::assert_abs_diff_eq;

    fn certified(inst: &ExtremalInstance) -> KktSolution {
        let rep = solve(inst, &SolverConfig::default()).unwrap();
        assert!(rep.certified);
        rep.solution
    }

    #[test]
    fn worked_case_upper_active() {
        // kx = 1, m2 = 0.05: solves 1/(1+x) = 0.2 + 0.05 -> ktz2 = 3
        let inst = ExtremalInstance::scalar(1.0, 4.0, 1.0, 2.0).unwrap();
        let sol = certified(&inst);
        let e = enhance(&inst, &sol).unwrap();
        assert_abs_diff_eq!(e.ktz1.get(0, 0), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(e.ktz2.get(0, 0), 3.0, epsilon = 1e-10);

        let ord = check_orderings(&e, 1e-8);
        assert!(ord.pass);
        assert_abs_diff_eq!(ord.kz1_minus_ktz1, 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ord.ktz2_minus_ktz1, 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ord.kz2_minus_ktz2, 1.0, epsilon = 1e-10);

        let prop = check_proportionality(&e, 1e-8).unwrap();
        assert!(prop.pass, "{prop:?}");

        let val = check_value_equality(&e, 1e-8).unwrap();
        assert!(val.pass, "{val:?}");
    }

    #[test]
    fn worked_case_lower_active() {
        // kx = 0, m1 = 0.25: 1/(2(0.5 + 0.25)) = 2/3, ktz2 = 2
        let inst = ExtremalInstance::scalar(1.0, 2.0, 1.0, 3.0).unwrap();
        let sol = certified(&inst);
        let e = enhance(&inst, &sol).unwrap();
        assert_abs_diff_eq!(e.ktz1.get(0, 0), 2.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(e.ktz2.get(0, 0), 2.0, epsilon = 1e-10);

        let ord = check_orderings(&e, 1e-8);
        assert!(ord.pass);
        assert_abs_diff_eq!(ord.kz1_minus_ktz1, 1.0 / 3.0, epsilon = 1e-10);
        assert_abs_diff_eq!(ord.kz2_minus_ktz2, 0.0, epsilon = 1e-10);

        let prop = check_proportionality(&e, 1e-8).unwrap();
        // 0 + 2/3 = (3-1)^{-1} (2 - 2/3)
        assert!(prop.pass, "{prop:?}");

        let val = check_value_equality(&e, 1e-8).unwrap();
        assert!(val.pass, "{val:?}");
    }

    #[test]
    fn interior_optimum_is_a_fixed_point() {
        let inst = ExtremalInstance::scalar(1.0, 4.0, 3.0, 2.0).unwrap();
        let sol = certified(&inst);
        let e = enhance(&inst, &sol).unwrap();
        assert_abs_diff_eq!(e.ktz1.get(0, 0), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.ktz2.get(0, 0), 4.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.f_nats, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_mu_below_one() {
        let inst = ExtremalInstance::scalar(1.0, 2.0, 1.0, 0.5).unwrap();
        let sol = KktSolution {
            kx: SymMatrix::scalar(1.0),
            m1: SymMatrix::scalar(0.0),
            m2: SymMatrix::scalar(0.0),
            stationarity_residual: 0.0,
            slack1: 0.0,
            slack2: 0.0,
            objective_nats: 0.0,
        };
        assert!(enhance(&inst, &sol).is_err());
    }

    #[test]
    fn proportionality_requires_mu_above_one() {
        let inst = ExtremalInstance::scalar(1.0, 1.0, 1.0, 1.0).unwrap();
        let sol = certified(&inst);
        let e = enhance(&inst, &sol).unwrap();
        assert!(check_proportionality(&e, 1e-8).is_err());
    }

    #[test]
    fn epi_tight_at_enhanced_optimum() {
        let inst = ExtremalInstance::scalar(1.0, 4.0, 1.0, 2.0).unwrap();
        let sol = certified(&inst);
        let e = enhance(&inst, &sol).unwrap();
        assert!(epi_tightness_gap(&e).unwrap() < 1e-9);
    }

    #[test]
    fn direct_proof_chain_on_random_instances() {
        use rand::{Rng, SeedableRng};
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..10 {
            let n = 1 + (rng.random::<u32>() % 3) as usize;
            let rand_pd = |rng: &mut ChaCha8Rng, ridge: f64| {
                let a = crate::nalgebra::DMatrix::from_fn(n, n, |_, _| {
                    rng.random::<f64>() * 2.0 - 1.0
                });
                SymMatrix::from_dmatrix(
                    &(&a * a.transpose() * (1.0 / n as f64)
                        + crate::nalgebra::DMatrix::identity(n, n) * ridge),
                )
            };
            let inst = ExtremalInstance::new(
                rand_pd(&mut rng, 0.4),
                rand_pd(&mut rng, 0.4),
                rand_pd(&mut rng, 0.3),
                1.1 + 5.0 * rng.random::<f64>(),
            )
            .unwrap();
            let sol = certified(&inst);
            let e = enhance(&inst, &sol).unwrap();
            let opt_aux = auxiliary_objective(&e, &sol.kx).unwrap();
            // objective(X) <= aux(X) <= aux(X*) = objective(X*) per link
            for t in [0.1f64, 0.5, 0.95] {
                let kx = inst.s.scale(t);
                let obj = gaussian_objective(&kx, &inst).unwrap();
                let aux = auxiliary_objective(&e, &kx).unwrap();
                assert!(obj <= aux + 1e-7, "{obj} > {aux}");
                assert!(aux <= opt_aux + 1e-7, "{aux} > {opt_aux}");
            }
            let opt = gaussian_objective(&sol.kx, &inst).unwrap();
            assert!((opt_aux - opt).abs() <= 1e-7);
        }
    }

    #[test]
    fn direct_proof_chain_on_gaussian_candidates() {
        // objective(X) <= objective_aux(X) <= objective_aux(X*) = objective(X*)
        let inst = ExtremalInstance::scalar(1.0, 4.0, 1.0, 2.0).unwrap();
        let sol = certified(&inst);
        let e = enhance(&inst, &sol).unwrap();
        let opt = gaussian_objective(&sol.kx, &inst).unwrap();
        for t in [0.0f64, 0.25, 0.5, 0.75, 1.0] {
            let kx = inst.s.scale(t);
            let obj = gaussian_objective(&kx, &inst).unwrap();
            let aux = auxiliary_objective(&e, &kx).unwrap();
            assert!(obj <= aux + 1e-7, "t={t}: {obj} > {aux}");
            assert!(aux <= auxiliary_objective(&e, &sol.kx).unwrap() + 1e-7);
        }
        assert_abs_diff_eq!(
            auxiliary_objective(&e, &sol.kx).unwrap(),
            opt,
            epsilon = 1e-9
        );
    }
}
