//! Real symmetric matrices with the covariance-cone operations used
//! throughout the crate: PSD tests, Löwner-order comparisons,
//! log-determinants, symmetric square roots and congruence transforms.
//!
//! Matrices are stored dense row-major and symmetrized on construction
//! ((M + Mᵀ)/2), which tolerates roundoff from upstream products. Spectral
//! work is delegated to nalgebra's symmetric eigendecomposition and Cholesky.

use crate::error::{Error, Result};
use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Relative eigenvalue threshold below which a direction counts as null when
/// computing numerical rank: |lambda| < RANK_TOL * max |lambda|.
pub const RANK_TOL: f64 = 1e-10;

/// Symmetry tolerance applied when ingesting matrices from JSON.
pub const JSON_SYMMETRY_TOL: f64 = 1e-9;

/// A real symmetric `dim x dim` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Build from row-major entries, symmetrizing (M + Mᵀ)/2.
    pub fn from_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInstance("dimension must be >= 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimMismatch(entries.len(), dim * dim));
        }
        for (k, &v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(k / dim, k % dim));
            }
        }
        let mut sym = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                sym[i * dim + j] = 0.5 * (entries[i * dim + j] + entries[j * dim + i]);
            }
        }
        Ok(SymMatrix { dim, entries: sym })
    }

    /// Build from a function of (row, col); only the upper triangle is read.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        SymMatrix { dim, entries }
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        Self::from_fn(dim, |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// 1x1 matrix, handy for scalar instances.
    pub fn scalar(v: f64) -> Self {
        SymMatrix {
            dim: 1,
            entries: vec![v],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    /// Symmetrize an nalgebra matrix back into a `SymMatrix`.
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let dim = m.nrows();
        Self::from_fn(dim, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    pub fn add(&self, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &SymMatrix) -> SymMatrix {
        debug_assert_eq!(self.dim, other.dim);
        SymMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|a| a * c).collect(),
        }
    }

    /// Symmetrized product (AB + BA)/2 is not what we usually want; this is
    /// the plain product A*B as a general matrix.
    pub fn mul_general(&self, other: &SymMatrix) -> DMatrix<f64> {
        self.to_dmatrix() * other.to_dmatrix()
    }

    /// Congruence A ↦ QᵀAQ.
    pub fn congruence(&self, q: &DMatrix<f64>) -> SymMatrix {
        SymMatrix::from_dmatrix(&(q.transpose() * self.to_dmatrix() * q))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.to_dmatrix());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    /// Full eigendecomposition; returns (eigenvalues, eigenvector columns),
    /// eigenvalues ascending.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.to_dmatrix());
        let mut idx: Vec<usize> = (0..self.dim).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vecs = DMatrix::zeros(self.dim, self.dim);
        for (col, &i) in idx.iter().enumerate() {
            vecs.set_column(col, &eig.eigenvectors.column(i));
        }
        (vals, vecs)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Numerical rank: eigenvalues below `RANK_TOL * max |eig|` count as zero.
    pub fn numerical_rank(&self) -> usize {
        let vals = self.eigenvalues();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0;
        }
        vals.iter().filter(|v| v.abs() >= RANK_TOL * scale).count()
    }

    /// Inverse via Cholesky; input must be strictly positive definite.
    pub fn inverse_pd(&self) -> Result<SymMatrix> {
        let chol = Cholesky::new(self.to_dmatrix())
            .ok_or_else(|| Error::NotPositiveDefinite(self.min_eigenvalue()))?;
        Ok(SymMatrix::from_dmatrix(&chol.inverse()))
    }

    /// Symmetric PSD square root via eigendecomposition; tiny negative
    /// eigenvalues (roundoff) are clipped to zero.
    pub fn sqrt_psd(&self) -> Result<SymMatrix> {
        let (vals, vecs) = self.eigen();
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (i, &v) in vals.iter().enumerate() {
            if v < -RANK_TOL * scale.max(1e-300) {
                return Err(Error::NotPsd(v));
            }
            d[(i, i)] = v.max(0.0).sqrt();
        }
        let m = &vecs * d * vecs.transpose();
        Ok(SymMatrix::from_dmatrix(&m))
    }

    /// Clip negative eigenvalues to zero (projection onto the PSD cone).
    pub fn clip_psd(&self) -> SymMatrix {
        let (vals, vecs) = self.eigen();
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for (i, &v) in vals.iter().enumerate() {
            d[(i, i)] = v.max(0.0);
        }
        SymMatrix::from_dmatrix(&(&vecs * d * vecs.transpose()))
    }

    /// Quadratic form vᵀ M v.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += v[i] * self.get(i, j) * v[j];
            }
        }
        acc
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// True iff the smallest eigenvalue of `m` is >= -tol.
pub fn is_psd(m: &SymMatrix, tol: f64) -> bool {
    m.min_eigenvalue() >= -tol
}

/// Löwner comparison a ⪯ b: true iff b - a is PSD within `tol`.
pub fn loewner_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch(a.dim(), b.dim()));
    }
    Ok(is_psd(&b.sub(a), tol))
}

/// Natural log of the determinant of a strictly positive definite matrix,
/// computed from the Cholesky factor (never by determinant expansion).
pub fn logdet(m: &SymMatrix) -> Result<f64> {
    let chol = Cholesky::new(m.to_dmatrix())
        .ok_or_else(|| Error::NotPositiveDefinite(m.min_eigenvalue()))?;
    let l = chol.l();
    Ok(2.0 * (0..m.dim()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

/// Trace of the product A*B of two symmetric matrices.
pub fn trace_product(a: &SymMatrix, b: &SymMatrix) -> f64 {
    debug_assert_eq!(a.dim(), b.dim());
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += a.get(i, j) * b.get(j, i);
        }
    }
    acc
}

// JSON form: {"dim": n, "rows": [[...], ...]} with a strict symmetry check.
#[derive(Serialize, Deserialize)]
struct SymMatrixWire {
    dim: usize,
    rows: Vec<Vec<f64>>,
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = (0..self.dim)
            .map(|i| self.entries[i * self.dim..(i + 1) * self.dim].to_vec())
            .collect();
        SymMatrixWire {
            dim: self.dim,
            rows,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = SymMatrixWire::deserialize(deserializer)?;
        if wire.rows.len() != wire.dim || wire.rows.iter().any(|r| r.len() != wire.dim) {
            return Err(D::Error::custom(format!(
                "rows do not form a {0}x{0} matrix",
                wire.dim
            )));
        }
        let flat: Vec<f64> = wire.rows.into_iter().flatten().collect();
        let n = wire.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                let gap = (flat[i * n + j] - flat[j * n + i]).abs();
                if gap > JSON_SYMMETRY_TOL {
                    return Err(D::Error::custom(
                        Error::NotSymmetric { i, j, gap }.to_string(),
                    ));
                }
            }
        }
        SymMatrix::from_rows(n, &flat).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn is_psd_identity_and_zero() {
        assert!(is_psd(&SymMatrix::identity(3), 1e-12));
        assert!(is_psd(&SymMatrix::zeros(2), 0.0));
    }

    #[test]
    fn is_psd_indefinite() {
        // eigenvalues {3, -1} from the characteristic polynomial
        let m = SymMatrix::from_rows(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(!is_psd(&m, 1e-12));
    }

    #[test]
    fn loewner_basics() {
        let z = SymMatrix::zeros(2);
        let i = SymMatrix::identity(2);
        assert!(loewner_leq(&z, &i, 0.0).unwrap());
        // diag(2,2) - diag(1,3) = diag(1,-1), indefinite
        let a = SymMatrix::diagonal(&[1.0, 3.0]);
        let b = SymMatrix::diagonal(&[2.0, 2.0]);
        assert!(!loewner_leq(&a, &b, 1e-12).unwrap());
        // reflexive at tol 0
        assert!(loewner_leq(&a, &a, 0.0).unwrap());
    }

    #[test]
    fn loewner_dim_mismatch() {
        let a = SymMatrix::identity(2);
        let b = SymMatrix::identity(3);
        assert!(matches!(
            loewner_leq(&a, &b, 0.0),
            Err(Error::DimMismatch(2, 3))
        ));
    }

    #[test]
    fn logdet_values() {
        assert_abs_diff_eq!(logdet(&SymMatrix::identity(3)).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            logdet(&SymMatrix::diagonal(&[2.0, 4.0])).unwrap(),
            8.0f64.ln(),
            epsilon = 1e-12
        );
        let m = SymMatrix::from_rows(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(logdet(&m).unwrap(), 3.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn logdet_rejects_singular() {
        let m = SymMatrix::diagonal(&[1.0, 0.0]);
        assert!(logdet(&m).is_err());
    }

    #[test]
    fn from_rows_rejects_non_finite() {
        let r = SymMatrix::from_rows(2, &[1.0, f64::NAN, 0.0, 1.0]);
        assert!(matches!(r, Err(Error::NonFinite(0, 1))));
    }

    #[test]
    fn symmetrizes_on_construction() {
        let m = SymMatrix::from_rows(2, &[1.0, 0.3, 0.1, 1.0]).unwrap();
        assert_abs_diff_eq!(m.get(0, 1), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(m.get(1, 0), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let m = SymMatrix::from_rows(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let r = m.sqrt_psd().unwrap();
        let sq = SymMatrix::from_dmatrix(&(r.to_dmatrix() * r.to_dmatrix()));
        assert!(m.max_abs_diff(&sq) < 1e-12);
    }

    #[test]
    fn numerical_rank_detects_null_directions() {
        let m = SymMatrix::diagonal(&[1.0, 1e-14, 2.0]);
        assert_eq!(m.numerical_rank(), 2);
        assert_eq!(SymMatrix::zeros(3).numerical_rank(), 0);
        assert_eq!(SymMatrix::identity(3).numerical_rank(), 3);
    }

    #[test]
    fn json_round_trip_and_symmetry_check() {
        let m = SymMatrix::from_rows(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"dim\":2"));
        let back: SymMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);

        let bad = r#"{"dim":2,"rows":[[1.0,0.5],[0.3,1.0]]}"#;
        assert!(serde_json::from_str::<SymMatrix>(bad).is_err());
    }

    #[test]
    fn exp_logdet_matches_eigenvalue_product() {
        // random-ish PD matrices built as A Aᵀ + I
        let mut seed = 42u64;
        let mut next = move || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        for n in 1..=5 {
            let a = DMatrix::from_fn(n, n, |_, _| next());
            let m = SymMatrix::from_dmatrix(&(&a * a.transpose() + DMatrix::identity(n, n)));
            let ld = logdet(&m).unwrap();
            let prod: f64 = m.eigenvalues().iter().product();
            assert!((ld.exp() - prod).abs() / prod.abs() < 1e-9);
        }
    }
}
