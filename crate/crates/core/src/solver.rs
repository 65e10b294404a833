//! Gaussian-restricted solver for the constrained extremal problem
//!
//! ```text
//! maximize   (1/2) log((2 pi e)^n |K + Kz1|) - (mu/2) log((2 pi e)^n |K + Kz2|)
//! subject to 0 ⪯ K ⪯ S
//! ```
//!
//! The problem is nonconvex, so the solver runs a multi-start interior-point
//! scheme (see [`crate::opt`]) and certifies the result through the
//! first-order conditions
//!
//! ```text
//! (1/2)(K* + Kz1)^{-1} + M1 = (mu/2)(K* + Kz2)^{-1} + M2
//! M1 K* = 0,   M2 (S - K*) = 0,   M1, M2 ⪰ 0
//! ```
//!
//! Multipliers are recovered by projecting the objective gradient onto the
//! null spaces of `K*` and `S - K*`; the returned residual is zero exactly at
//! a KKT point.

use crate::error::{Error, Result};
use crate::exec::{self, Parallelism};
use crate::matrix::{is_psd, logdet, SymMatrix};
use crate::opt::{self, EngineConfig, MatrixObjective};
use crate::LN_2PIE;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

/// A problem instance: noise covariances, covariance cap, and weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "ExtremalInstanceWire")]
pub struct ExtremalInstance {
    pub kz1: SymMatrix,
    pub kz2: SymMatrix,
    pub s: SymMatrix,
    pub mu: f64,
}

#[derive(Deserialize)]
struct ExtremalInstanceWire {
    kz1: SymMatrix,
    kz2: SymMatrix,
    s: SymMatrix,
    mu: f64,
}

impl TryFrom<ExtremalInstanceWire> for ExtremalInstance {
    type Error = Error;
    fn try_from(w: ExtremalInstanceWire) -> Result<Self> {
        ExtremalInstance::new(w.kz1, w.kz2, w.s, w.mu)
    }
}

impl ExtremalInstance {
    /// Validate dimensions and definiteness. `mu` may be any finite real;
    /// Gaussian optimality over all distributions is only guaranteed for
    /// `mu >= 1`, but the Gaussian-restricted program itself is well posed
    /// for the extended ranges the degraded-case checks exercise.
    pub fn new(kz1: SymMatrix, kz2: SymMatrix, s: SymMatrix, mu: f64) -> Result<Self> {
        let n = kz1.dim();
        if kz2.dim() != n || s.dim() != n {
            return Err(Error::InvalidInstance("covariance dimensions differ".into()));
        }
        if !mu.is_finite() {
            return Err(Error::InvalidInstance("mu must be finite".into()));
        }
        for (name, m) in [("kz1", &kz1), ("kz2", &kz2)] {
            let floor = 1e-12 * m.trace() / n as f64;
            if m.min_eigenvalue() <= floor {
                return Err(Error::InvalidInstance(format!(
                    "{name} must be strictly positive definite"
                )));
            }
        }
        if !is_psd(&s, 1e-9 * (1.0 + s.trace().abs())) {
            return Err(Error::InvalidInstance(
                "s must be positive semidefinite".into(),
            ));
        }
        Ok(ExtremalInstance { kz1, kz2, s, mu })
    }

    pub fn dim(&self) -> usize {
        self.kz1.dim()
    }

    /// Scalar convenience constructor.
    pub fn scalar(kz1: f64, kz2: f64, s: f64, mu: f64) -> Result<Self> {
        Self::new(
            SymMatrix::scalar(kz1),
            SymMatrix::scalar(kz2),
            SymMatrix::scalar(s),
            mu,
        )
    }
}

/// Solver configuration. Defaults: KKT tolerance 1e-8, feasibility tolerance
/// 1e-9, 8 restarts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub max_restarts: usize,
    pub seed: u64,
    pub parallelism: Parallelism,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kkt_tol: 1e-8,
            feas_tol: 1e-9,
            max_restarts: 8,
            seed: 0,
            parallelism: Parallelism::Auto,
        }
    }
}

/// An optimizer with recovered multipliers and certification diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KktSolution {
    pub kx: SymMatrix,
    pub m1: SymMatrix,
    pub m2: SymMatrix,
    /// Frobenius norm of the stationarity defect.
    pub stationarity_residual: f64,
    /// ||M1 * K||_F
    pub slack1: f64,
    /// ||M2 * (S - K)||_F
    pub slack2: f64,
    /// Objective value in nats.
    pub objective_nats: f64,
}

/// Outcome of a solve: the best point, whether it certifies, and every
/// distinct KKT point encountered across restarts (the stationarity system
/// may admit several in dimension two and higher; no uniqueness is claimed).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: KktSolution,
    pub certified: bool,
    pub distinct_kkt_points: Vec<KktSolution>,
    pub restarts: usize,
}

/// Objective of the Gaussian-restricted program, in nats.
pub fn gaussian_objective(kx: &SymMatrix, inst: &ExtremalInstance) -> Result<f64> {
    if kx.dim() != inst.dim() {
        return Err(Error::DimMismatch(kx.dim(), inst.dim()));
    }
    let n = inst.dim() as f64;
    let d1 = logdet(&kx.add(&inst.kz1))?;
    let d2 = logdet(&kx.add(&inst.kz2))?;
    Ok(0.5 * (n * LN_2PIE + d1) - 0.5 * inst.mu * (n * LN_2PIE + d2))
}

/// Matrix gradient of [`gaussian_objective`]:
/// `(1/2)(K + Kz1)^{-1} - (mu/2)(K + Kz2)^{-1}`.
pub fn gaussian_gradient(kx: &SymMatrix, inst: &ExtremalInstance) -> Result<SymMatrix> {
    let inv1 = kx.add(&inst.kz1).inverse_pd()?;
    let inv2 = kx.add(&inst.kz2).inverse_pd()?;
    Ok(inv1.scale(0.5).sub(&inv2.scale(0.5 * inst.mu)))
}

struct GaussianProgram<'a> {
    inst: &'a ExtremalInstance,
}

impl MatrixObjective for GaussianProgram<'_> {
    fn value(&self, k: &SymMatrix) -> Result<f64> {
        gaussian_objective(k, self.inst)
    }
    fn gradient(&self, k: &SymMatrix) -> Result<SymMatrix> {
        gaussian_gradient(k, self.inst)
    }
}

/// Recover the multipliers of a candidate optimizer: the stationarity
/// condition forces `G = M2 - M1` with `range(M1) ⊆ null(K)` and
/// `range(M2) ⊆ null(S - K)`, so the gradient is split across the two
/// subspaces by minimal-norm least squares (which collapses to the plain
/// projections `-P0 G P0` and `Ps G Ps` when the subspaces are orthogonal).
/// Null spaces are detected with a relative eigenvalue threshold of
/// `1e-8 * trace`; tiny negative multiplier eigenvalues are clipped to zero.
/// Fails when the two null spaces are aligned within `tol` of a shared
/// direction, since the split is then ambiguous.
pub fn recover_multipliers(
    kx: &SymMatrix,
    inst: &ExtremalInstance,
    tol: f64,
) -> Result<(SymMatrix, SymMatrix)> {
    let g = gaussian_gradient(kx, inst)?;
    // null spaces detected at the scale of the constraint box, so nearly-zero
    // optimizers are treated as rank deficient
    let scale = inst.s.trace().max(kx.trace()).max(1e-300);
    let u0 = null_basis(kx, scale);
    let us = null_basis(&inst.s.sub(kx), scale);
    let n = kx.dim();
    let gd = g.to_dmatrix();

    if u0.ncols() == 0 && us.ncols() == 0 {
        return Ok((SymMatrix::zeros(n), SymMatrix::zeros(n)));
    }
    if u0.ncols() == 0 {
        let m2 = SymMatrix::from_dmatrix(&(&us * us.transpose() * &gd * &us * us.transpose()))
            .clip_psd();
        return Ok((SymMatrix::zeros(n), m2));
    }
    if us.ncols() == 0 {
        let m1 = SymMatrix::from_dmatrix(&(&u0 * u0.transpose() * (-&gd) * &u0 * u0.transpose()))
            .clip_psd();
        return Ok((m1, SymMatrix::zeros(n)));
    }

    // both constraints active: with C = U0ᵀ Us, the least-squares split
    // solves A = -G00 + C (Gss + Cᵀ A C) Cᵀ, a contraction whenever the
    // subspaces share no direction (spectral norm of C below one)
    let c = u0.transpose() * &us;
    let align = c.norm();
    let overlap = c
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    if overlap > 1.0 - tol.max(1e-12) {
        return Err(Error::DegenerateGeometry(overlap));
    }
    let _ = align;
    let g00 = u0.transpose() * &gd * &u0;
    let gss = us.transpose() * &gd * &us;
    let mut a = -&g00; // starting point: orthogonal-case projection
    for _ in 0..20_000 {
        let next = -&g00 + &c * (&gss + c.transpose() * &a * &c) * c.transpose();
        let delta = (&next - &a).norm();
        a = next;
        if delta < 1e-15 * (1.0 + a.norm()) {
            break;
        }
    }
    let b = &gss + c.transpose() * &a * &c;
    let m1 = SymMatrix::from_dmatrix(&(&u0 * a * u0.transpose())).clip_psd();
    let m2 = SymMatrix::from_dmatrix(&(&us * b * us.transpose())).clip_psd();
    Ok((m1, m2))
}

/// Orthonormal basis of the numerical null space of a PSD matrix
/// (eigenvalues <= 1e-8 * scale, with scale set by the constraint box).
fn null_basis(m: &SymMatrix, scale: f64) -> DMatrix<f64> {
    let (vals, vecs) = m.eigen();
    let thr = 1e-8 * scale.max(0.0);
    let cols: Vec<usize> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= thr)
        .map(|(i, _)| i)
        .collect();
    let mut out = DMatrix::zeros(m.dim(), cols.len());
    for (j, &i) in cols.iter().enumerate() {
        out.set_column(j, &vecs.column(i));
    }
    out
}

/// Combined KKT residual: the largest of the stationarity defect norm and
/// the two complementary-slackness norms, so it is zero exactly at a KKT
/// point.
pub fn kkt_residual(sol: &KktSolution, inst: &ExtremalInstance) -> f64 {
    residual_parts(&sol.kx, &sol.m1, &sol.m2, inst)
        .map(|(a, b, c)| a.max(b).max(c))
        .unwrap_or(f64::INFINITY)
}

fn residual_parts(
    kx: &SymMatrix,
    m1: &SymMatrix,
    m2: &SymMatrix,
    inst: &ExtremalInstance,
) -> Result<(f64, f64, f64)> {
    let g = gaussian_gradient(kx, inst)?;
    // stationarity: G + M1 - M2 = 0
    let defect = g.add(m1).sub(m2);
    let slack1 = m1.mul_general(kx).norm();
    let slack2 = m2.mul_general(&inst.s.sub(kx)).norm();
    Ok((defect.frobenius_norm(), slack1, slack2))
}

fn assemble_solution(
    kx: SymMatrix,
    inst: &ExtremalInstance,
    mult_tol: f64,
) -> Result<KktSolution> {
    let (m1, m2) = recover_multipliers(&kx, inst, mult_tol)?;
    let (stat, s1, s2) = residual_parts(&kx, &m1, &m2, inst)?;
    let objective_nats = gaussian_objective(&kx, inst)?;
    Ok(KktSolution {
        kx,
        m1,
        m2,
        stationarity_residual: stat,
        slack1: s1,
        slack2: s2,
        objective_nats,
    })
}

/// Solve the Gaussian-restricted program by multi-start interior point with
/// Newton polish, and certify the result through the recovered multipliers.
///
/// A rank-deficient `S` is rejected; apply
/// [`crate::reduce::reduce_rank_deficient`] first. When the objective is
/// constant (`mu = 1` with equal noise covariances) the maximum-entropy
/// endpoint `K = S` is returned.
pub fn solve(inst: &ExtremalInstance, cfg: &SolverConfig) -> Result<SolveReport> {
    let n = inst.dim();
    let rank = inst.s.numerical_rank();
    if rank < n {
        return Err(Error::RankDeficient { rank, dim: n });
    }

    // Constant objective: every feasible K is optimal; pick K = S.
    let scale = inst.kz1.trace().abs().max(inst.kz2.trace().abs());
    if inst.mu == 1.0 && inst.kz1.max_abs_diff(&inst.kz2) <= 1e-14 * scale.max(1.0) {
        let sol = assemble_solution(inst.s.clone(), inst, 1e-6)?;
        return Ok(SolveReport {
            certified: kkt_residual(&sol, inst) < cfg.kkt_tol,
            solution: sol,
            distinct_kkt_points: Vec::new(),
            restarts: 0,
        });
    }

    let starts = build_starts(inst, cfg);
    let restarts = starts.len();
    let program = GaussianProgram { inst };
    let engine = EngineConfig::default();

    let candidates: Vec<Option<KktSolution>> = exec::scope(cfg.parallelism, || {
        exec::map_indexed(restarts, |i| {
            let k = opt::maximize_from(&program, &inst.s, &starts[i], &engine).ok()?;
            assemble_solution(k, inst, 1e-6).ok()
        })
    });

    // deterministic selection: best objective, ties by residual then index
    let mut best: Option<(usize, KktSolution, f64)> = None;
    let mut kkt_points: Vec<KktSolution> = Vec::new();
    for (i, cand) in candidates.into_iter().enumerate() {
        let Some(sol) = cand else { continue };
        let res = kkt_residual(&sol, inst);
        if res < cfg.kkt_tol {
            let dup = kkt_points
                .iter()
                .any(|p| p.kx.max_abs_diff(&sol.kx) < 1e-6 * (1.0 + inst.s.trace().abs()));
            if !dup {
                kkt_points.push(sol.clone());
            }
        }
        let replace = match &best {
            None => true,
            Some((_, b, bres)) => {
                sol.objective_nats > b.objective_nats
                    || (sol.objective_nats == b.objective_nats && res < *bres)
            }
        };
        if replace {
            best = Some((i, sol, res));
        }
    }

    let (_, solution, best_res) = best.ok_or(Error::NotCertified {
        restarts,
        residual: f64::INFINITY,
    })?;
    Ok(SolveReport {
        certified: best_res < cfg.kkt_tol,
        solution,
        distinct_kkt_points: kkt_points,
        restarts,
    })
}

fn build_starts(inst: &ExtremalInstance, cfg: &SolverConfig) -> Vec<SymMatrix> {
    let n = inst.dim();
    let mut starts = vec![inst.s.scale(0.5)];
    if (inst.mu - 1.0).abs() > 1e-12 {
        // unconstrained stationary point (Kz2 - mu Kz1)/(mu - 1), projected
        // into the box by the engine itself
        let stat = inst
            .kz2
            .sub(&inst.kz1.scale(inst.mu))
            .scale(1.0 / (inst.mu - 1.0));
        starts.push(stat);
    }
    let unif = Uniform::new(0.05f64, 0.95f64).expect("static bounds");
    while starts.len() < cfg.max_restarts.max(1) {
        let idx = starts.len() as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(0x5_0000 + idx);
        // random PSD contraction of S: S^{1/2} Q diag(u) Q^T S^{1/2}
        let gauss = DMatrix::from_fn(n, n, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let q = gauss.qr().q();
        let mut d = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = unif.sample(&mut rng);
        }
        let w: DMatrix<f64> = &q * d * q.transpose();
        if let Ok(s_sqrt) = inst.s.sqrt_psd() {
            let sd = s_sqrt.to_dmatrix();
            starts.push(SymMatrix::from_dmatrix(&(&sd * w * &sd)));
        } else {
            starts.push(inst.s.scale(0.25));
        }
    }
    starts
}

/// Report of a midpoint concavity check of the optimal value in `S`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub value_s1_nats: f64,
    pub value_s2_nats: f64,
    pub value_mid_nats: f64,
    /// `g(t s1 + (1-t) s2) - [t g(s1) + (1-t) g(s2)]`; concavity holds when
    /// this is above `-tol`.
    pub slack_nats: f64,
    pub holds: bool,
}

/// Optimal value of the Gaussian-restricted program at constraint `s`,
/// reducing rank-deficient constraints to full-rank instances first (the
/// entropy offsets of the reduction keep the value comparable).
pub fn gaussian_optimal_value(
    kz1: &SymMatrix,
    kz2: &SymMatrix,
    mu: f64,
    s: &SymMatrix,
    cfg: &SolverConfig,
) -> Result<f64> {
    let inst = ExtremalInstance::new(kz1.clone(), kz2.clone(), s.clone(), mu)?;
    if s.numerical_rank() < s.dim() {
        let red = crate::reduce::reduce_rank_deficient(&inst)?;
        let inner = solve(&red.reduced_instance, cfg)?;
        return Ok(inner.solution.objective_nats + red.entropy_offsets.0
            - mu * red.entropy_offsets.1);
    }
    Ok(solve(&inst, cfg)?.solution.objective_nats)
}

/// Check midpoint concavity of the optimal value in the constraint matrix:
/// `g*(t s1 + (1-t) s2) >= t g*(s1) + (1-t) g*(s2) - tol`.
#[allow(clippy::too_many_arguments)]
pub fn concavity_check(
    kz1: &SymMatrix,
    kz2: &SymMatrix,
    mu: f64,
    s1: &SymMatrix,
    s2: &SymMatrix,
    t: f64,
    tol: f64,
    cfg: &SolverConfig,
) -> Result<ConcavityReport> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Precondition("t must lie in [0, 1]".into()));
    }
    if !is_psd(s1, 1e-9) || !is_psd(s2, 1e-9) {
        return Err(Error::Precondition("s1, s2 must be PSD".into()));
    }
    let v1 = gaussian_optimal_value(kz1, kz2, mu, s1, cfg)?;
    let v2 = gaussian_optimal_value(kz1, kz2, mu, s2, cfg)?;
    let mid = s1.scale(t).add(&s2.scale(1.0 - t));
    let vm = gaussian_optimal_value(kz1, kz2, mu, &mid, cfg)?;
    let slack = vm - (t * v1 + (1.0 - t) * v2);
    Ok(ConcavityReport {
        value_s1_nats: v1,
        value_s2_nats: v2,
        value_mid_nats: vm,
        slack_nats: slack,
        holds: slack >= -tol,
    })
}

/// Brute-force maximizer for scalar instances: grid search over `[0, s]`.
/// Test oracle; independent of the interior-point path. Grid chunks are
/// evaluated in parallel and combined by exact max (ties to the smaller
/// argument), so the result does not depend on the chunking.
pub fn scalar_grid_oracle(inst: &ExtremalInstance, step: f64) -> (f64, f64) {
    assert_eq!(inst.dim(), 1, "grid oracle is scalar-only");
    let (kz1, kz2, s, mu) = (
        inst.kz1.get(0, 0),
        inst.kz2.get(0, 0),
        inst.s.get(0, 0),
        inst.mu,
    );
    let f = |k: f64| 0.5 * (LN_2PIE + (k + kz1).ln()) - 0.5 * mu * (LN_2PIE + (k + kz2).ln());
    let n_steps = (s / step).ceil() as usize;
    let chunk = 65_536usize;
    let n_chunks = n_steps / chunk + 1;
    let partials = exec::map_indexed(n_chunks, |ci| {
        let lo = ci * chunk;
        let hi = ((ci + 1) * chunk).min(n_steps + 1);
        let mut best_k = f64::NAN;
        let mut best_v = f64::NEG_INFINITY;
        for i in lo..hi {
            let k = (i as f64 * step).min(s);
            let v = f(k);
            if v > best_v {
                best_v = v;
                best_k = k;
            }
        }
        (best_v, best_k)
    });
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for (v, k) in partials {
        if v > best.0 || (v == best.0 && k < best.1) {
            best = (v, k);
        }
    }
    (best.1, best.0)
}
