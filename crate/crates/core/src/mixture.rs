//! Finite Gaussian mixtures: the non-Gaussian candidate family used for
//! verification and for Fisher/entropy estimation.
//!
//! Mixtures are closed under the two operations the checks need: convolution
//! with another mixture (componentwise means add, covariances add, weights
//! multiply) and the scaling `X ↦ c X` (means scale by `c`, covariances by
//! `c²`). Log-densities are evaluated with a log-sum-exp over components, so
//! responsibilities are stable far into the tails.

use crate::error::{Error, Result};
use crate::matrix::SymMatrix;
use crate::LN_2PIE;
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A finite Gaussian mixture with strictly positive-definite components.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MixtureWire", into = "MixtureWire")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<SymMatrix>,
    comps: Vec<Component>,
}

/// Cached per-component factorization for density work.
#[derive(Debug, Clone)]
struct Component {
    mean: DVector<f64>,
    cov_inv: DMatrix<f64>,
    /// log of the normalizing constant: -(n/2) log(2 pi) - (1/2) log|K|
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct MixtureWire {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<SymMatrix>,
}

impl From<GaussianMixture> for MixtureWire {
    fn from(m: GaussianMixture) -> Self {
        MixtureWire {
            weights: m.weights,
            means: m.means,
            covs: m.covs,
        }
    }
}

impl TryFrom<MixtureWire> for GaussianMixture {
    type Error = Error;
    fn try_from(w: MixtureWire) -> Result<Self> {
        GaussianMixture::new(w.weights, w.means, w.covs)
    }
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<SymMatrix>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covs.len() {
            return Err(Error::InvalidMixture(
                "weights, means and covs must have equal nonzero length".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidMixture("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        let n = means[0].len();
        if n == 0 {
            return Err(Error::InvalidMixture("dimension must be >= 1".into()));
        }
        for (m, c) in means.iter().zip(&covs) {
            if m.len() != n || c.dim() != n {
                return Err(Error::InvalidMixture("component dimensions differ".into()));
            }
        }
        let comps = covs
            .iter()
            .zip(&means)
            .map(|(c, m)| {
                let chol = Cholesky::new(c.to_dmatrix()).ok_or_else(|| {
                    Error::InvalidMixture("component covariance is not strictly PD".into())
                })?;
                let logdet = 2.0 * (0..n).map(|i| chol.l()[(i, i)].ln()).sum::<f64>();
                Ok(Component {
                    mean: DVector::from_row_slice(m),
                    cov_inv: chol.inverse(),
                    log_norm: -0.5 * (n as f64) * (2.0 * PI).ln() - 0.5 * logdet,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GaussianMixture {
            weights,
            means,
            covs,
            comps,
        })
    }

    /// Single zero-mean Gaussian as a one-component mixture.
    pub fn gaussian(cov: SymMatrix) -> Result<Self> {
        let n = cov.dim();
        Self::new(vec![1.0], vec![vec![0.0; n]], vec![cov])
    }

    /// Symmetric scalar two-point mixture `(1/2) N(-m, v) + (1/2) N(m, v)`.
    pub fn symmetric_pair(m: f64, v: f64) -> Result<Self> {
        Self::new(
            vec![0.5, 0.5],
            vec![vec![-m], vec![m]],
            vec![SymMatrix::scalar(v), SymMatrix::scalar(v)],
        )
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covs(&self) -> &[SymMatrix] {
        &self.covs
    }

    pub fn is_single_gaussian(&self) -> bool {
        self.weights.len() == 1
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.dim();
        let mut m = vec![0.0; n];
        for (w, mu) in self.weights.iter().zip(&self.means) {
            for i in 0..n {
                m[i] += w * mu[i];
            }
        }
        m
    }

    /// Exact covariance: sum of within- and between-component parts.
    pub fn covariance(&self) -> SymMatrix {
        let n = self.dim();
        let mbar = self.mean();
        SymMatrix::from_fn(n, |i, j| {
            let mut acc = 0.0;
            for ((w, mu), c) in self.weights.iter().zip(&self.means).zip(&self.covs) {
                acc += w * (c.get(i, j) + (mu[i] - mbar[i]) * (mu[j] - mbar[j]));
            }
            acc
        })
    }

    /// Per-component log densities `log(w_i) + log N_i(x)`.
    fn component_log_densities(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_row_slice(x);
        self.weights
            .iter()
            .zip(&self.comps)
            .map(|(w, c)| {
                let d = &xv - &c.mean;
                w.ln() + c.log_norm - 0.5 * (c.cov_inv.clone() * &d).dot(&d)
            })
            .collect()
    }

    /// log f(x) via log-sum-exp.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let logs = self.component_log_densities(x);
        log_sum_exp(&logs)
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// Score `∇ log f(x) = Σ r_i(x) (-K_i^{-1}(x - m_i))` with responsibilities
    /// `r_i` computed by softmax. Errors when the density underflows to zero
    /// in double precision (all component exponents below ~-745), reporting
    /// the Mahalanobis distance to the nearest component.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        let logs = self.component_log_densities(x);
        let max = logs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if max < -745.0 {
            let nearest = self
                .comps
                .iter()
                .map(|c| {
                    let d = DVector::from_row_slice(x) - &c.mean;
                    (c.cov_inv.clone() * &d).dot(&d).sqrt()
                })
                .fold(f64::INFINITY, f64::min);
            return Err(Error::DensityUnderflow(nearest));
        }
        let denom: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        let xv = DVector::from_row_slice(x);
        let mut out = DVector::zeros(self.dim());
        for (l, c) in logs.iter().zip(&self.comps) {
            let r = (l - max).exp() / denom;
            out -= r * (c.cov_inv.clone() * (&xv - &c.mean));
        }
        Ok(out.iter().copied().collect())
    }

    /// Convolve with an independent mixture: the result has one component per
    /// pair, with means summed and covariances added.
    pub fn convolve(&self, other: &GaussianMixture) -> Result<GaussianMixture> {
        if self.dim() != other.dim() {
            return Err(Error::DimMismatch(self.dim(), other.dim()));
        }
        let mut weights = Vec::new();
        let mut means = Vec::new();
        let mut covs = Vec::new();
        for ((wa, ma), ca) in self.weights.iter().zip(&self.means).zip(&self.covs) {
            for ((wb, mb), cb) in other.weights.iter().zip(&other.means).zip(&other.covs) {
                weights.push(wa * wb);
                means.push(ma.iter().zip(mb).map(|(a, b)| a + b).collect());
                covs.push(ca.add(cb));
            }
        }
        // renormalize to absorb roundoff in the weight products
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        GaussianMixture::new(weights, means, covs)
    }

    /// Convolve with an independent zero-mean Gaussian of covariance `kz`.
    pub fn add_noise(&self, kz: &SymMatrix) -> Result<GaussianMixture> {
        if kz.dim() != self.dim() {
            return Err(Error::DimMismatch(kz.dim(), self.dim()));
        }
        GaussianMixture::new(
            self.weights.clone(),
            self.means.clone(),
            self.covs.iter().map(|c| c.add(kz)).collect(),
        )
    }

    /// Scale `X ↦ c X`.
    pub fn scaled(&self, c: f64) -> Result<GaussianMixture> {
        if c == 0.0 {
            return Err(Error::InvalidMixture(
                "scale factor must be nonzero to keep components nondegenerate".into(),
            ));
        }
        GaussianMixture::new(
            self.weights.clone(),
            self.means
                .iter()
                .map(|m| m.iter().map(|v| c * v).collect())
                .collect(),
            self.covs.iter().map(|k| k.scale(c * c)).collect(),
        )
    }

    /// Shift every component mean by `delta`.
    pub fn shifted(&self, delta: &[f64]) -> Result<GaussianMixture> {
        if delta.len() != self.dim() {
            return Err(Error::DimMismatch(delta.len(), self.dim()));
        }
        GaussianMixture::new(
            self.weights.clone(),
            self.means
                .iter()
                .map(|m| m.iter().zip(delta).map(|(a, b)| a + b).collect())
                .collect(),
            self.covs.clone(),
        )
    }

    /// Product of two independent lower-dimensional mixtures (block-diagonal
    /// covariances, concatenated means, weight products).
    pub fn product(&self, other: &GaussianMixture) -> Result<GaussianMixture> {
        let n1 = self.dim();
        let n2 = other.dim();
        let mut weights = Vec::new();
        let mut means = Vec::new();
        let mut covs = Vec::new();
        for ((wa, ma), ca) in self.weights.iter().zip(&self.means).zip(&self.covs) {
            for ((wb, mb), cb) in other.weights.iter().zip(&other.means).zip(&other.covs) {
                weights.push(wa * wb);
                let mut m = ma.clone();
                m.extend_from_slice(mb);
                means.push(m);
                covs.push(SymMatrix::from_fn(n1 + n2, |i, j| {
                    if i < n1 && j < n1 {
                        ca.get(i, j)
                    } else if i >= n1 && j >= n1 {
                        cb.get(i - n1, j - n1)
                    } else {
                        0.0
                    }
                }));
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        GaussianMixture::new(weights, means, covs)
    }

    /// Exact entropy when the mixture is a single Gaussian.
    pub fn exact_gaussian_entropy(&self) -> Option<f64> {
        if self.is_single_gaussian() {
            let n = self.dim() as f64;
            crate::matrix::logdet(&self.covs[0])
                .ok()
                .map(|ld| 0.5 * (n * LN_2PIE + ld))
        } else {
            None
        }
    }

    /// Integration window per axis: union of component means +- `k` component
    /// standard deviations.
    pub fn window(&self, k: f64) -> Vec<(f64, f64)> {
        (0..self.dim())
            .map(|d| {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (m, c) in self.means.iter().zip(&self.covs) {
                    let sd = c.get(d, d).sqrt();
                    lo = lo.min(m[d] - k * sd);
                    hi = hi.max(m[d] + k * sd);
                }
                (lo, hi)
            })
            .collect()
    }
}

fn log_sum_exp(logs: &[f64]) -> f64 {
    let max = logs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}
