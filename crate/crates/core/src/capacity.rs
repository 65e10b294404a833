//! Application-layer rate computations.
//!
//! Broadcast channel: for the two-user vector Gaussian channel
//! `Y_k = X + Z_k` under the matrix power constraint `Cov(X) ⪯ S`, every
//! achievable weighted sum rate satisfies
//!
//! ```text
//! mu1 R1 + mu2 R2 <= max_{0 ⪯ K ⪯ S} (mu1/2) log|(K+Kz1)/Kz1|
//!                                  + (mu2/2) log|(S+Kz2)/(K+Kz2)|     (mu2 >= mu1)
//! ```
//!
//! (roles swap for `mu1 >= mu2`), and the bound is attained, so sweeping the
//! weight ray traces the capacity region boundary.
//!
//! Distributed source coding with one quadratic distortion constraint: after
//! reduction to the degraded form `Y1 = Y2 + Z`, the weighted rate bound is
//! the minimum over quantization covariances `0 ⪯ K ⪯ K_Y2` of the two rate
//! terms, with a flag reporting when the conditional-covariance constraint
//! `Cov(Y1|U) ⪰ D` bites (the bound is then not known to be tight).

use crate::error::{Error, Result};
use crate::exec;
use crate::matrix::{is_psd, loewner_leq, logdet, SymMatrix};
use crate::opt::{maximize_from, EngineConfig, MatrixObjective};
use crate::solver::{solve, ExtremalInstance, SolverConfig};
use crate::LN_2PIE;
use serde::{Deserialize, Serialize};

/// Broadcast-channel instance: noise covariances and the power cap.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "BcInstanceWire")]
pub struct BcInstance {
    pub kz1: SymMatrix,
    pub kz2: SymMatrix,
    pub s: SymMatrix,
}

#[derive(Deserialize)]
struct BcInstanceWire {
    kz1: SymMatrix,
    kz2: SymMatrix,
    s: SymMatrix,
}

impl TryFrom<BcInstanceWire> for BcInstance {
    type Error = Error;
    fn try_from(w: BcInstanceWire) -> Result<Self> {
        BcInstance::new(w.kz1, w.kz2, w.s)
    }
}

impl BcInstance {
    pub fn new(kz1: SymMatrix, kz2: SymMatrix, s: SymMatrix) -> Result<Self> {
        let n = kz1.dim();
        if kz2.dim() != n || s.dim() != n {
            return Err(Error::InvalidInstance("dimensions differ".into()));
        }
        for (name, m) in [("kz1", &kz1), ("kz2", &kz2)] {
            if logdet(m).is_err() {
                return Err(Error::InvalidInstance(format!(
                    "{name} must be strictly positive definite"
                )));
            }
        }
        if !is_psd(&s, 1e-9 * (1.0 + s.trace().abs())) {
            return Err(Error::InvalidInstance("s must be PSD".into()));
        }
        Ok(BcInstance { kz1, kz2, s })
    }

    pub fn dim(&self) -> usize {
        self.kz1.dim()
    }
}

/// A boundary point of the rate region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatePoint {
    pub r1_nats: f64,
    pub r2_nats: f64,
    /// The input covariance achieving the point.
    pub kx: SymMatrix,
    pub mu1: f64,
    pub mu2: f64,
    /// The weighted-sum upper bound evaluated through the solver; equals
    /// `mu1 R1 + mu2 R2` at the achieving covariance.
    pub weighted_sum_bound_nats: f64,
}

impl RatePoint {
    pub fn weighted_sum_nats(&self) -> f64 {
        self.mu1 * self.r1_nats + self.mu2 * self.r2_nats
    }
}

/// Optimal weighted sum rate for one weight pair. Nonnegative weights, not
/// both zero.
pub fn bc_weighted_sum(inst: &BcInstance, mu1: f64, mu2: f64) -> Result<RatePoint> {
    bc_weighted_sum_cfg(inst, mu1, mu2, &SolverConfig::default())
}

pub fn bc_weighted_sum_cfg(
    inst: &BcInstance,
    mu1: f64,
    mu2: f64,
    cfg: &SolverConfig,
) -> Result<RatePoint> {
    if mu1 < 0.0 || mu2 < 0.0 || (mu1 == 0.0 && mu2 == 0.0) {
        return Err(Error::Precondition(
            "weights must be nonnegative and not both zero".into(),
        ));
    }
    let n = inst.dim() as f64;
    let rank = inst.s.numerical_rank();
    if rank == 0 {
        // no power: the region is the origin
        let kx = SymMatrix::zeros(inst.dim());
        return Ok(RatePoint {
            r1_nats: 0.0,
            r2_nats: 0.0,
            kx,
            mu1,
            mu2,
            weighted_sum_bound_nats: 0.0,
        });
    }

    let rates = |kx: &SymMatrix| -> Result<(f64, f64)> {
        if mu2 >= mu1 {
            let r1 = 0.5 * (logdet(&kx.add(&inst.kz1))? - logdet(&inst.kz1)?);
            let r2 = 0.5 * (logdet(&inst.s.add(&inst.kz2))? - logdet(&kx.add(&inst.kz2))?);
            Ok((r1, r2))
        } else {
            let r1 = 0.5 * (logdet(&inst.s.add(&inst.kz1))? - logdet(&kx.add(&inst.kz1))?);
            let r2 = 0.5 * (logdet(&kx.add(&inst.kz2))? - logdet(&inst.kz2)?);
            Ok((r1, r2))
        }
    };

    // degenerate weights: the inner optimization collapses to K = 0
    if mu1 == 0.0 || mu2 == 0.0 {
        let kx = SymMatrix::zeros(inst.dim());
        let (r1, r2) = rates(&kx)?;
        let bound = mu1 * r1 + mu2 * r2;
        return Ok(RatePoint {
            r1_nats: r1,
            r2_nats: r2,
            kx,
            mu1,
            mu2,
            weighted_sum_bound_nats: bound,
        });
    }

    // reuse the extremal solver on the weighted objective
    let (slot1, slot2, w_small, w_big) = if mu2 >= mu1 {
        (&inst.kz1, &inst.kz2, mu1, mu2)
    } else {
        (&inst.kz2, &inst.kz1, mu2, mu1)
    };
    let mu = w_big / w_small;
    let base = ExtremalInstance::new(slot1.clone(), slot2.clone(), inst.s.clone(), mu)?;
    let (kx, g_star) = if rank < inst.dim() {
        let red = crate::reduce::reduce_rank_deficient(&base)?;
        let inner = solve(&red.reduced_instance, cfg)?;
        if !inner.certified {
            return Err(Error::NotCertified {
                restarts: inner.restarts,
                residual: inner.solution.stationarity_residual,
            });
        }
        // lift the reduced optimizer back to the original coordinates
        let r = red.reduced_dim;
        let mut lift = nalgebra::DMatrix::<f64>::zeros(inst.dim(), inst.dim());
        lift.view_mut((0, 0), (r, r))
            .copy_from(&inner.solution.kx.to_dmatrix());
        let kx = SymMatrix::from_dmatrix(&(&red.basis * lift * red.basis.transpose()));
        let value = inner.solution.objective_nats + red.entropy_offsets.0
            - mu * red.entropy_offsets.1;
        (kx, value)
    } else {
        let rep = solve(&base, cfg)?;
        if !rep.certified {
            return Err(Error::NotCertified {
                restarts: rep.restarts,
                residual: rep.solution.stationarity_residual,
            });
        }
        (rep.solution.kx.clone(), rep.solution.objective_nats)
    };

    let (r1, r2) = rates(&kx)?;
    // transform the solver value into the weighted-sum bound
    let bound = if mu2 >= mu1 {
        mu1 * g_star - (mu1 - mu2) * 0.5 * n * LN_2PIE - 0.5 * mu1 * logdet(&inst.kz1)?
            + 0.5 * mu2 * logdet(&inst.s.add(&inst.kz2))?
    } else {
        mu2 * g_star - (mu2 - mu1) * 0.5 * n * LN_2PIE - 0.5 * mu2 * logdet(&inst.kz2)?
            + 0.5 * mu1 * logdet(&inst.s.add(&inst.kz1))?
    };
    Ok(RatePoint {
        r1_nats: r1,
        r2_nats: r2,
        kx,
        mu1,
        mu2,
        weighted_sum_bound_nats: bound,
    })
}

/// Sweep the weight ray `(mu1, mu2) = (cos t, sin t)` over `[0, pi/2]` and
/// return the boundary sorted by increasing `R1`. Endpoints are the two
/// single-user capacities.
pub fn bc_region_sweep(
    inst: &BcInstance,
    num_points: usize,
    cfg: &SolverConfig,
) -> Result<Vec<RatePoint>> {
    if num_points < 3 {
        return Err(Error::Precondition("need at least 3 sweep points".into()));
    }
    let thetas: Vec<f64> = (0..num_points)
        .map(|j| std::f64::consts::FRAC_PI_2 * j as f64 / (num_points - 1) as f64)
        .collect();
    let clamp = |w: f64| if w < 1e-12 { 0.0 } else { w };
    let pts: Vec<Result<RatePoint>> = exec::scope(cfg.parallelism, || {
        exec::map_indexed(num_points, |j| {
            bc_weighted_sum_cfg(inst, clamp(thetas[j].cos()), clamp(thetas[j].sin()), cfg)
        })
    });
    let mut pts = pts.into_iter().collect::<Result<Vec<_>>>()?;
    pts.sort_by(|a, b| {
        a.r1_nats
            .partial_cmp(&b.r1_nats)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(pts)
}

/// Distributed-source-coding instance in reduced (degraded) form:
/// `Y1 = Y2 + Z` with `Kz = K_Y1 - K_Y2 ⪰ 0`, distortion cap `D` on `Y1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DscInstanceWire")]
pub struct DscInstance {
    pub ky1: SymMatrix,
    pub ky2: SymMatrix,
    pub d: SymMatrix,
    /// Derived degraded noise `K_Y1 - K_Y2`.
    pub kz: SymMatrix,
}

#[derive(Deserialize)]
struct DscInstanceWire {
    ky1: SymMatrix,
    ky2: SymMatrix,
    d: SymMatrix,
}

impl TryFrom<DscInstanceWire> for DscInstance {
    type Error = Error;
    fn try_from(w: DscInstanceWire) -> Result<Self> {
        DscInstance::new(w.ky1, w.ky2, w.d)
    }
}

impl DscInstance {
    pub fn new(ky1: SymMatrix, ky2: SymMatrix, d: SymMatrix) -> Result<Self> {
        let n = ky1.dim();
        if ky2.dim() != n || d.dim() != n {
            return Err(Error::InvalidInstance("dimensions differ".into()));
        }
        for (name, m) in [("ky1", &ky1), ("ky2", &ky2), ("d", &d)] {
            if logdet(m).is_err() {
                return Err(Error::InvalidInstance(format!(
                    "{name} must be strictly positive definite"
                )));
            }
        }
        let kz = ky1.sub(&ky2);
        if !is_psd(&kz, 1e-9 * (1.0 + ky1.trace().abs())) {
            return Err(Error::InvalidInstance(
                "instance is not in degraded form: K_Y1 - K_Y2 must be PSD".into(),
            ));
        }
        Ok(DscInstance { ky1, ky2, d, kz })
    }
}

/// Result of the weighted DSC bound: the bound value, the minimizing
/// quantization covariance, and whether the distortion constraint bites.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DscBound {
    pub value_nats: f64,
    pub k: SymMatrix,
    /// True iff `K* + Kz ⪰ D` fails, i.e. the conditional-covariance
    /// constraint is active and the bound is not known to be attained.
    pub bite_flag: bool,
}

struct DscObjective<'a> {
    inst: &'a DscInstance,
    mu1: f64,
    mu2: f64,
}

// maximize the negated bound integrand; the -log|K| term acts as its own
// barrier at the zero boundary
impl MatrixObjective for DscObjective<'_> {
    fn value(&self, k: &SymMatrix) -> Result<f64> {
        let t1 = 0.5 * self.mu1 * (logdet(&k.add(&self.inst.kz))? - logdet(&self.inst.d)?);
        let t2 = 0.5 * self.mu2 * (logdet(&self.inst.ky2)? - logdet(k)?);
        Ok(-(t1 + t2))
    }
    fn gradient(&self, k: &SymMatrix) -> Result<SymMatrix> {
        let g1 = k.add(&self.inst.kz).inverse_pd()?.scale(0.5 * self.mu1);
        let g2 = k.inverse_pd()?.scale(0.5 * self.mu2);
        Ok(g2.sub(&g1))
    }
}

/// Minimize the weighted rate bound over `0 ⪯ K ⪯ K_Y2` and detect whether
/// the distortion constraint bites at the minimizer.
pub fn dsc_weighted_bound(inst: &DscInstance, mu1: f64, mu2: f64) -> Result<DscBound> {
    if !(mu1 > 0.0 && mu2 > 0.0) {
        return Err(Error::Precondition("weights must be strictly positive".into()));
    }
    let obj = DscObjective { inst, mu1, mu2 };
    let engine = EngineConfig::default();
    let mut best: Option<(f64, SymMatrix)> = None;
    for t in [0.5, 0.9, 0.2, 0.99] {
        let start = inst.ky2.scale(t);
        if let Ok(k) = maximize_from(&obj, &inst.ky2, &start, &engine) {
            if let Ok(v) = obj.value(&k) {
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, k));
                }
            }
        }
    }
    let (neg_value, k) = best.ok_or_else(|| {
        Error::InvalidInstance("no start converged for the DSC bound".into())
    })?;
    let bite_tol = 1e-9 * (1.0 + inst.d.trace().abs());
    let bite_flag = !is_psd(&k.add(&inst.kz).sub(&inst.d), bite_tol);
    Ok(DscBound {
        value_nats: -neg_value,
        k,
        bite_flag,
    })
}

/// Rates of the Gaussian quantize-and-bin scheme at quantization covariance
/// `K`: `R2 = (1/2) log|K_Y2 K^{-1}|` for the side-information source and
/// `R1 = (1/2) log|(K + Kz) D^{-1}|` (clipped at zero) for the distorted one.
pub fn dsc_separation_rates(inst: &DscInstance, k: &SymMatrix) -> Result<(f64, f64)> {
    if !is_psd(k, 1e-9 * (1.0 + k.trace().abs()))
        || !loewner_leq(k, &inst.ky2, 1e-9 * (1.0 + inst.ky2.trace().abs()))?
    {
        return Err(Error::Precondition(
            "quantization covariance must satisfy 0 ⪯ K ⪯ K_Y2".into(),
        ));
    }
    let r2 = 0.5 * (logdet(&inst.ky2)? - logdet(k)?);
    let r1 = (0.5 * (logdet(&k.add(&inst.kz))? - logdet(&inst.d)?)).max(0.0);
    Ok((r1, r2))
}
