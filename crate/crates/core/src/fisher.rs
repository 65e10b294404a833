//! Score functions and Fisher information matrices for Gaussian mixtures,
//! with numerical checks of the classical score identities: Cramér-Rao,
//! the matrix Fisher information inequality, the Stein identity, behavior of
//! scores under convolution, and the de Bruijn identity linking entropy
//! derivatives to Fisher information.
//!
//! Single Gaussians take the analytic route (`J = K^{-1}`, score `-K^{-1}u`);
//! proper mixtures integrate `E[rho rho^T]` by adaptive quadrature in one and
//! two dimensions and by stratified Monte Carlo above that.

use crate::entropy::{mixture_entropy, EstimateMethod, EstimatorConfig};
use crate::error::{Error, Result};
use crate::matrix::{trace_product, SymMatrix};
use crate::mixture::GaussianMixture;
use crate::quad::{adaptive_simpson, adaptive_simpson_2d};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// A Fisher information matrix with provenance and (for sampled estimates)
/// per-entry standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub j: SymMatrix,
    pub method: EstimateMethod,
    /// Per-entry standard error (Monte Carlo) or a uniform quadrature error
    /// bound; `None` for the analytic Gaussian case.
    pub stderr: Option<SymMatrix>,
}

impl FisherMatrix {
    /// Scalar summary of the estimator uncertainty: Frobenius norm of the
    /// stderr matrix (0 for analytic results).
    pub fn stderr_scale(&self) -> f64 {
        self.stderr.as_ref().map_or(0.0, |s| s.frobenius_norm())
    }
}

/// Score `∇ log f(x)` of a mixture density.
pub fn score(m: &GaussianMixture, x: &[f64]) -> Result<Vec<f64>> {
    m.score(x)
}

/// Fisher information matrix `E[rho rho^T]`.
pub fn fisher_matrix(m: &GaussianMixture, cfg: &EstimatorConfig) -> Result<FisherMatrix> {
    if m.is_single_gaussian() {
        return Ok(FisherMatrix {
            j: m.covs()[0].inverse_pd()?,
            method: EstimateMethod::ExactGaussian,
            stderr: None,
        });
    }
    let n = m.dim();
    match n {
        1 | 2 => {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (i..n).map(move |j| (i, j)))
                .collect();
            let integrand = |x: &[f64], out: &mut [f64]| {
                match m.score(x) {
                    Ok(s) => {
                        let f = m.density(x);
                        for (k, &(i, j)) in pairs.iter().enumerate() {
                            out[k] = s[i] * s[j] * f;
                        }
                    }
                    Err(_) => out.iter_mut().for_each(|v| *v = 0.0),
                }
            };
            let win = m.window(cfg.window_sigmas);
            let (vals, err) = if n == 1 {
                let r = adaptive_simpson(
                    |x, out| integrand(&[x], out),
                    win[0].0,
                    win[0].1,
                    cfg.quad_tol,
                    pairs.len(),
                )?;
                (r.values, r.error_estimate.max(cfg.quad_tol))
            } else {
                let r = adaptive_simpson_2d(
                    |x, y, out| integrand(&[x, y], out),
                    win[0].0,
                    win[0].1,
                    win[1].0,
                    win[1].1,
                    cfg.quad_tol_2d,
                    pairs.len(),
                )?;
                (r.values, r.error_estimate.max(cfg.quad_tol_2d))
            };
            let mut entries = vec![0.0; n * n];
            for (k, &(i, jj)) in pairs.iter().enumerate() {
                entries[i * n + jj] = vals[k];
                entries[jj * n + i] = vals[k];
            }
            let j = SymMatrix::from_rows(n, &entries)?;
            Ok(FisherMatrix {
                j,
                method: EstimateMethod::Quadrature,
                stderr: Some(SymMatrix::from_fn(n, |_, _| err)),
            })
        }
        _ => {
            let out_dim = n * (n + 1) / 2;
            let (mean, se) = crate::entropy::stratified_expectation(
                m,
                cfg.mc_samples,
                cfg.seed,
                0xF1,
                &|x, out| match m.score(x) {
                    Ok(s) => {
                        let mut k = 0;
                        for i in 0..n {
                            for j in i..n {
                                out[k] = s[i] * s[j];
                                k += 1;
                            }
                        }
                    }
                    Err(_) => out.iter_mut().for_each(|v| *v = 0.0),
                },
                out_dim,
            )?;
            let mut entries = vec![0.0; n * n];
            let mut se_entries = vec![0.0; n * n];
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    entries[i * n + j] = mean[k];
                    entries[j * n + i] = mean[k];
                    se_entries[i * n + j] = se[k];
                    se_entries[j * n + i] = se[k];
                    k += 1;
                }
            }
            Ok(FisherMatrix {
                j: SymMatrix::from_rows(n, &entries)?,
                method: EstimateMethod::MonteCarlo,
                stderr: Some(SymMatrix::from_rows(n, &se_entries)?),
            })
        }
    }
}

/// Cramér-Rao comparison `J(U) ⪰ Cov(U)^{-1}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CramerRaoReport {
    /// Smallest eigenvalue of `J - Cov^{-1}`.
    pub margin: f64,
    pub stderr: f64,
    pub pass: bool,
}

pub fn cramer_rao_check(m: &GaussianMixture, cfg: &EstimatorConfig) -> Result<CramerRaoReport> {
    let fm = fisher_matrix(m, cfg)?;
    let cov_inv = m.covariance().inverse_pd()?;
    let margin = fm.j.sub(&cov_inv).min_eigenvalue();
    let stderr = fm.stderr_scale();
    Ok(CramerRaoReport {
        margin,
        stderr,
        pass: margin >= -3.0 * stderr - 1e-9,
    })
}

/// Matrix Fisher information inequality
/// `J(U+V) ⪯ A J(U) A^T + (I-A) J(V) (I-A)^T` for independent `U`, `V`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiiReport {
    /// Smallest eigenvalue of `RHS - J(U+V)`.
    pub margin: f64,
    pub stderr: f64,
    pub pass: bool,
}

pub fn fii_check(
    u: &GaussianMixture,
    v: &GaussianMixture,
    a: &DMatrix<f64>,
    cfg: &EstimatorConfig,
) -> Result<FiiReport> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch(u.dim(), v.dim()));
    }
    let n = u.dim();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimMismatch(a.nrows(), n));
    }
    let ju = fisher_matrix(u, cfg)?;
    let jv = fisher_matrix(v, cfg)?;
    let jw = fisher_matrix(&u.convolve(v)?, cfg)?;
    let eye = DMatrix::<f64>::identity(n, n);
    let ia = &eye - a;
    let rhs = a * ju.j.to_dmatrix() * a.transpose() + &ia * jv.j.to_dmatrix() * ia.transpose();
    let gap = SymMatrix::from_dmatrix(&rhs).sub(&jw.j);
    let stderr = ju.stderr_scale() + jv.stderr_scale() + jw.stderr_scale();
    let margin = gap.min_eigenvalue();
    Ok(FiiReport {
        margin,
        stderr,
        pass: margin >= -3.0 * stderr - 1e-9,
    })
}

/// Stein identity check: `E[rho] = 0` and `E[U rho^T] = -I`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteinReport {
    pub mean_score_norm: f64,
    /// `||E[U rho^T] + I||_F`
    pub cross_moment_defect: f64,
    pub pass: bool,
}

pub fn stein_check(m: &GaussianMixture, tol: f64, cfg: &EstimatorConfig) -> Result<SteinReport> {
    let n = m.dim();
    if m.is_single_gaussian() {
        // exact: E[rho] = 0, E[U rho^T] = -E[U U^T] K^{-1} shifted by the mean
        return Ok(SteinReport {
            mean_score_norm: 0.0,
            cross_moment_defect: 0.0,
            pass: true,
        });
    }
    // components: n for E[rho], n*n for E[x rho^T]
    let out_dim = n + n * n;
    let fill = |x: &[f64], out: &mut [f64]| match m.score(x) {
        Ok(s) => {
            let f = m.density(x);
            for i in 0..n {
                out[i] = s[i] * f;
            }
            for i in 0..n {
                for j in 0..n {
                    out[n + i * n + j] = x[i] * s[j] * f;
                }
            }
        }
        Err(_) => out.iter_mut().for_each(|v| *v = 0.0),
    };
    let win = m.window(cfg.window_sigmas);
    let vals = match n {
        1 => {
            adaptive_simpson(|x, out| fill(&[x], out), win[0].0, win[0].1, cfg.quad_tol, out_dim)?
                .values
        }
        2 => {
            adaptive_simpson_2d(
                |x, y, out| fill(&[x, y], out),
                win[0].0,
                win[0].1,
                win[1].0,
                win[1].1,
                cfg.quad_tol_2d,
                out_dim,
            )?
            .values
        }
        _ => {
            crate::entropy::stratified_expectation(
                m,
                cfg.mc_samples,
                cfg.seed,
                0xF2,
                &|x, out| {
                    if let Ok(s) = m.score(x) {
                        out[..n].copy_from_slice(&s);
                        for i in 0..n {
                            for j in 0..n {
                                out[n + i * n + j] = x[i] * s[j];
                            }
                        }
                    } else {
                        out.iter_mut().for_each(|v| *v = 0.0);
                    }
                },
                out_dim,
            )?
            .0
        }
    };
    let mean_score_norm = vals[..n].iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut defect = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { -1.0 } else { 0.0 };
            let d = vals[n + i * n + j] - target;
            defect += d * d;
        }
    }
    let cross_moment_defect = defect.sqrt();
    Ok(SteinReport {
        mean_score_norm,
        cross_moment_defect,
        pass: mean_score_norm <= tol && cross_moment_defect <= tol,
    })
}

/// de Bruijn identity check: `d/dt h(X + sqrt(t) Z) = (1/2) Tr(Kz J(X + sqrt(t) Z))`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeBruijnReport {
    pub analytic: f64,
    pub finite_difference: f64,
    pub gap: f64,
    pub stderr: f64,
    pub pass: bool,
    /// Set when the finite-difference noise floor dominates the signal.
    pub inconclusive: bool,
}

pub fn debruijn_check(
    x: &GaussianMixture,
    kz: &SymMatrix,
    t: f64,
    cfg: &EstimatorConfig,
) -> Result<DeBruijnReport> {
    if !(t > 0.0) {
        return Err(Error::Precondition("t must be positive".into()));
    }
    if kz.dim() != x.dim() {
        return Err(Error::DimMismatch(kz.dim(), x.dim()));
    }
    let noisy = |tau: f64| -> Result<GaussianMixture> { x.add_noise(&kz.scale(tau)) };

    if x.is_single_gaussian() {
        // both sides in closed form: dh/dt = (1/2) Tr((K + t Kz)^{-1} Kz)
        let k_t = x.covs()[0].add(&kz.scale(t));
        let j = k_t.inverse_pd()?;
        let analytic = 0.5 * trace_product(kz, &j);
        return Ok(DeBruijnReport {
            analytic,
            finite_difference: analytic,
            gap: 0.0,
            stderr: 0.0,
            pass: true,
            inconclusive: false,
        });
    }

    // analytic side from the Fisher matrix of X + sqrt(t) Z
    let jm = fisher_matrix(&noisy(t)?, cfg)?;
    let analytic = 0.5 * trace_product(kz, &jm.j);
    let se_fisher = 0.5 * kz.frobenius_norm() * jm.stderr_scale();

    // finite difference with Richardson refinement across two step sizes
    let delta = (1e-3 * t.max(1.0)).min(0.45 * t);
    let h = |tau: f64| -> Result<(f64, f64)> {
        let e = mixture_entropy(&noisy(tau)?, cfg)?;
        Ok((e.value_nats, e.stderr_nats))
    };
    let (hp, sp) = h(t + delta)?;
    let (hm, sm) = h(t - delta)?;
    let (hp2, sp2) = h(t + 0.5 * delta)?;
    let (hm2, sm2) = h(t - 0.5 * delta)?;
    let fd_full = (hp - hm) / (2.0 * delta);
    let fd_half = (hp2 - hm2) / delta;
    let finite_difference = (4.0 * fd_half - fd_full) / 3.0;
    let noise = (sp + sm + sp2 + sm2) / delta;
    let richardson = (fd_half - fd_full).abs() / 3.0;
    let stderr = se_fisher + noise + richardson;

    let gap = (analytic - finite_difference).abs();
    let inconclusive = noise > 0.1 * analytic.abs().max(1e-6);
    Ok(DeBruijnReport {
        analytic,
        finite_difference,
        gap,
        stderr,
        pass: gap <= 3.0 * stderr,
        inconclusive,
    })
}

/// Convolution behavior of scores: for independent `U`, `V` and `W = U + V`,
/// `rho_W(w) = E[rho_U(U) | W = w]`, compared on a grid of `w` values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvolutionScoreReport {
    pub max_gap: f64,
    pub grid_points: usize,
    pub pass: bool,
}

pub fn convolution_score_check(
    u: &GaussianMixture,
    v: &GaussianMixture,
    tol: f64,
    cfg: &EstimatorConfig,
) -> Result<ConvolutionScoreReport> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch(u.dim(), v.dim()));
    }
    if u.dim() != 1 {
        return Err(Error::Precondition(
            "convolution score check integrates the joint density; supported in dimension 1".into(),
        ));
    }
    let w_mix = u.convolve(v)?;
    let win = w_mix.window(3.0);
    let grid: Vec<f64> = (0..9)
        .map(|i| win[0].0 + (win[0].1 - win[0].0) * i as f64 / 8.0)
        .collect();
    let uwin = u.window(cfg.window_sigmas);
    let vwin = v.window(cfg.window_sigmas);
    let mut max_gap: f64 = 0.0;
    for &w in &grid {
        let direct = w_mix.score(&[w])?[0];
        // E[rho_U(U) | W = w] = ∫ rho_U(a) f_U(a) f_V(w - a) da / f_W(w);
        // the tolerance scales with f_W(w) so the ratio stays accurate in
        // the tails of the grid
        let lo = uwin[0].0.min(w - vwin[0].1);
        let hi = uwin[0].1.max(w - vwin[0].0);
        let tol = cfg.quad_tol * w_mix.density(&[w]).max(1e-12);
        let r = adaptive_simpson(
            |a, out| {
                let fu = u.density(&[a]);
                let fv = v.density(&[w - a]);
                let su = if fu > 1e-300 {
                    u.score(&[a]).map(|s| s[0]).unwrap_or(0.0)
                } else {
                    0.0
                };
                out[0] = su * fu * fv;
                out[1] = fu * fv;
            },
            lo,
            hi,
            tol,
            2,
        )?;
        let conditional = r.values[0] / r.values[1];
        max_gap = max_gap.max((direct - conditional).abs());
    }
    Ok(ConvolutionScoreReport {
        max_gap,
        grid_points: grid.len(),
        pass: max_gap <= tol,
    })
}
