//! Bounded Levenberg-Marquardt with finite-difference Jacobians.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    pub max_iter: usize,
    /// Relative cost reduction below which the fit is converged.
    pub ftol: f64,
    /// Step size (relative to `1 + |x|`) below which the fit is converged.
    pub xtol: f64,
    pub gtol: f64,
    pub fd_step: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        LsqOptions { max_iter: 300, ftol: 1e-14, xtol: 1e-12, gtol: 1e-14, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqFit {
    pub x: Vec<f64>,
    /// `0.5 |r|^2`
    pub cost: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|x| x * x).sum::<f64>()
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(*lo, *hi);
    }
}

/// Central differences, falling back to one-sided steps at the bounds.
fn jacobian<F>(f: &F, x: &[f64], r0: &[f64], lower: &[f64], upper: &[f64], h0: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, x.len());
    for j in 0..x.len() {
        let h = h0 * (1.0 + x[j].abs());
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] = (x[j] + h).min(upper[j]);
        xm[j] = (x[j] - h).max(lower[j]);
        let fp = if xp[j] > x[j] { Some(f(&xp)?) } else { None };
        let fm = if xm[j] < x[j] { Some(f(&xm)?) } else { None };
        let col: Vec<f64> = match (fp, fm) {
            (Some(p), Some(q)) => p.iter().zip(&q).map(|(a, b)| (a - b) / (xp[j] - xm[j])).collect(),
            (Some(p), None) => p.iter().zip(r0).map(|(a, b)| (a - b) / (xp[j] - x[j])).collect(),
            (None, Some(q)) => r0.iter().zip(&q).map(|(a, b)| (a - b) / (x[j] - xm[j])).collect(),
            (None, None) => vec![0.0; m],
        };
        if col.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteLoss(x.to_vec()));
        }
        jac.set_column(j, &DVector::from_vec(col));
    }
    Ok(jac)
}

/// Minimizes `0.5 |f(x)|^2` inside the box `[lower, upper]`.
///
/// Trial points with non-finite residuals are treated as rejected steps.
pub fn least_squares<F>(f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: &LsqOptions) -> Result<LsqFit>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::LengthMismatch { expected: n, got: lower.len().min(upper.len()) });
    }
    let mut x = x0.to_vec();
    clamp(&mut x, lower, upper);
    let mut r = f(&x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLoss(x));
    }
    let mut cost = cost_of(&r);
    let mut mu = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let jac = jacobian(&f, &x, &r, lower, upper, opts.fd_step)?;
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &rv;
        if g.amax() <= opts.gtol * (1.0 + cost) {
            converged = true;
            break;
        }
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += mu * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                mu *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial, lower, upper);
            let moved: f64 = trial.iter().zip(&x).map(|(a, b)| (a - b).abs() / (1.0 + b.abs())).fold(0.0, f64::max);
            let rt = match f(&trial) {
                Ok(rt) if rt.iter().all(|v| v.is_finite()) => rt,
                _ => {
                    mu *= 10.0;
                    continue;
                }
            };
            let ct = cost_of(&rt);
            if ct < cost {
                let rel = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                x = trial;
                r = rt;
                cost = ct;
                mu = (mu / 3.0).max(1e-12);
                improved = true;
                if rel < opts.ftol || moved < opts.xtol {
                    converged = true;
                }
                break;
            }
            if moved < opts.xtol {
                converged = true;
                break;
            }
            mu *= 10.0;
        }
        if converged || !improved {
            converged = converged || cost == 0.0;
            break;
        }
    }
    Ok(LsqFit { x, cost, converged, iterations })
}

/// Runs [`least_squares`] from every start and keeps the lowest cost.
/// Starts that fail outright are skipped.
pub fn multistart<F>(f: F, starts: &[Vec<f64>], lower: &[f64], upper: &[f64], opts: &LsqOptions) -> Result<LsqFit>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut best: Option<LsqFit> = None;
    let mut last_err = None;
    for x0 in starts {
        match least_squares(&f, x0, lower, upper, opts) {
            Ok(fit) => {
                if best.as_ref().is_none_or(|b| fit.cost < b.cost) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Estimation("no starting points".into())))
}
