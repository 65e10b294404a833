//! Adaptive Simpson quadrature over vector-valued integrands.
//!
//! One engine serves every estimator in the crate: entropy integrals, score
//! moments, Fisher matrices and conditional expectations all evaluate a batch
//! of component integrands at the same abscissas, so the integrand returns a
//! small vector and refinement is controlled in the sup norm. Error budget is
//! split proportionally to subinterval length; each accepted cell contributes
//! its Richardson estimate `|S2 - S1|/15` to the reported error.

use crate::error::{Error, Result};

/// Result of a quadrature pass: component integrals plus an accumulated
/// error estimate (sup-norm style, conservative).
#[derive(Debug, Clone)]
pub struct QuadResult {
    pub values: Vec<f64>,
    pub error_estimate: f64,
    pub evaluations: usize,
}

const MAX_DEPTH: usize = 48;

/// Integrate `f` over `[a, b]` to absolute tolerance `tol` (per component).
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64, m: usize) -> Result<QuadResult>
where
    F: Fn(f64, &mut [f64]),
{
    let mut evals = 0usize;
    let eval = |x: f64, evals: &mut usize| {
        let mut out = vec![0.0; m];
        f(x, &mut out);
        *evals += 1;
        out
    };
    let fa = eval(a, &mut evals);
    let fm = eval(0.5 * (a + b), &mut evals);
    let fb = eval(b, &mut evals);
    let whole = simpson(a, b, &fa, &fm, &fb);
    let mut acc = vec![0.0; m];
    let mut err = 0.0;
    recurse(
        &|x, e| eval(x, e),
        a,
        b,
        &fa,
        &fm,
        &fb,
        &whole,
        tol,
        0,
        &mut acc,
        &mut err,
        &mut evals,
    )?;
    Ok(QuadResult {
        values: acc,
        error_estimate: err,
        evaluations: evals,
    })
}

fn simpson(a: f64, b: f64, fa: &[f64], fm: &[f64], fb: &[f64]) -> Vec<f64> {
    let h = (b - a) / 6.0;
    fa.iter()
        .zip(fm)
        .zip(fb)
        .map(|((&va, &vm), &vb)| h * (va + 4.0 * vm + vb))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    eval: &dyn Fn(f64, &mut usize) -> Vec<f64>,
    a: f64,
    b: f64,
    fa: &[f64],
    fm: &[f64],
    fb: &[f64],
    whole: &[f64],
    tol: f64,
    depth: usize,
    acc: &mut [f64],
    err: &mut f64,
    evals: &mut usize,
) -> Result<()> {
    let mid = 0.5 * (a + b);
    let fl = eval(0.5 * (a + mid), evals);
    let fr = eval(0.5 * (mid + b), evals);
    let left = simpson(a, mid, fa, &fl, fm);
    let right = simpson(mid, b, fm, &fr, fb);
    let gap = left
        .iter()
        .zip(&right)
        .zip(whole)
        .map(|((&l, &r), &w)| (l + r - w).abs())
        .fold(0.0, f64::max);
    if gap <= 15.0 * tol || depth >= MAX_DEPTH {
        if depth >= MAX_DEPTH && gap > 15.0 * tol * 64.0 {
            return Err(Error::QuadratureCap(gap / 15.0));
        }
        for (i, (&l, &r)) in left.iter().zip(&right).enumerate() {
            // Richardson extrapolation of the composite estimate
            acc[i] += l + r + (l + r - whole[i]) / 15.0;
        }
        *err += gap / 15.0;
        return Ok(());
    }
    recurse(
        eval, a, mid, fa, &fl, fm, &left, tol * 0.5, depth + 1, acc, err, evals,
    )?;
    recurse(
        eval, mid, b, fm, &fr, fb, &right, tol * 0.5, depth + 1, acc, err, evals,
    )
}

/// Nested 2-D integration over the rectangle `[ax, bx] x [ay, by]`: an outer
/// adaptive pass in `x` whose integrand is an inner adaptive pass in `y`.
/// The inner tolerance is tightened by the rectangle's aspect so the combined
/// absolute error lands near `tol`.
pub fn adaptive_simpson_2d<F>(
    f: F,
    ax: f64,
    bx: f64,
    ay: f64,
    by: f64,
    tol: f64,
    m: usize,
) -> Result<QuadResult>
where
    F: Fn(f64, f64, &mut [f64]),
{
    let inner_tol = (tol / (bx - ax).max(1.0)) * 0.1;
    let total_evals = std::cell::Cell::new(0usize);
    let outer = adaptive_simpson(
        |x, out| {
            let inner = adaptive_simpson(|y, o| f(x, y, o), ay, by, inner_tol, m)
                .unwrap_or(QuadResult {
                    values: vec![f64::NAN; m],
                    error_estimate: f64::INFINITY,
                    evaluations: 0,
                });
            total_evals.set(total_evals.get() + inner.evaluations);
            out.copy_from_slice(&inner.values);
        },
        ax,
        bx,
        tol,
        m,
    )?;
    let mut res = outer;
    res.evaluations += total_evals.get();
    if res.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::QuadratureCap(f64::INFINITY));
    }
    Ok(res)
}
