//! Numerical Laplace inversion by the de Hoog, Knight & Stokes method:
//! a Fourier-series inversion on the Bromwich line whose partial sums are
//! accelerated by a continued fraction built with the quotient-difference
//! algorithm.
//!
//! The transform is sampled at `s_k = shift + i pi k / T` for
//! `k = 0..=2M`. The samples depend only on the period `T`, so every time
//! that shares a period reuses the same continued-fraction coefficients.
//!
//! Accuracy degrades quickly once `t` is far below `T / 2`, and sharp pulses
//! need more terms. [`DeHoog::invert`] therefore groups times into geometric
//! windows, each with its own period close to the window's last time.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the period `T` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Period {
    /// One period for every time.
    Fixed { big_t: f64 },
    /// Times are grouped into windows `(b / ratio, b]` and each window uses
    /// `T = scale * b`.
    Windowed { scale: f64, ratio: f64 },
}

/// de Hoog inverter configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeHoog {
    /// Number of continued-fraction terms `M`; `2M + 1` transform samples.
    pub terms: usize,
    /// Target discretisation error; the abscissa shift is `-ln(tol) / (2T)`.
    pub tolerance: f64,
    pub period: Period,
}

impl Default for DeHoog {
    fn default() -> Self {
        DeHoog {
            terms: 25,
            tolerance: 1e-10,
            period: Period::Windowed { scale: 1.2, ratio: 1.25 },
        }
    }
}

impl DeHoog {
    /// Inverse transform at `times`. Non-positive times map to zero.
    pub fn invert<F>(&self, mut transform: F, times: &[f64]) -> Result<Vec<f64>>
    where
        F: FnMut(Complex64) -> Result<Complex64>,
    {
        if self.terms == 0 || !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "de Hoog needs terms >= 1 and 0 < tolerance < 1, got {} and {}",
                self.terms, self.tolerance
            )));
        }
        let mut out = vec![0.0; times.len()];
        let t_max = times.iter().copied().fold(0.0, f64::max);
        if t_max <= 0.0 {
            return Ok(out);
        }
        let log_tol = self.tolerance.ln();
        match self.period {
            Period::Fixed { big_t } => {
                if !(big_t > t_max) {
                    return Err(Error::InvalidParameter(format!(
                        "period {big_t} must exceed the largest time {t_max}"
                    )));
                }
                let idx: Vec<usize> = (0..times.len()).filter(|&i| times[i] > 0.0).collect();
                let sub: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
                let vals = invert_dehoog(&mut transform, &sub, big_t, -log_tol / (2.0 * big_t), self.terms)?;
                for (i, v) in idx.into_iter().zip(vals) {
                    out[i] = v;
                }
            }
            Period::Windowed { scale, ratio } => {
                if !(scale > 1.0) || !(ratio > 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "windowed period needs scale > 1 and ratio > 1, got {scale} and {ratio}"
                    )));
                }
                let mut groups: std::collections::BTreeMap<u32, Vec<usize>> = Default::default();
                for (i, &t) in times.iter().enumerate() {
                    if t > 0.0 {
                        let mut j = ((t_max / t).ln() / ratio.ln()).floor().max(0.0) as u32;
                        // guard against rounding at window edges
                        while j > 0 && t > t_max / ratio.powi(j as i32) {
                            j -= 1;
                        }
                        groups.entry(j).or_default().push(i);
                    }
                }
                for (j, idx) in groups {
                    let upper = t_max / ratio.powi(j as i32);
                    let big_t = scale * upper;
                    let sub: Vec<f64> = idx.iter().map(|&i| times[i]).collect();
                    let vals =
                        invert_dehoog(&mut transform, &sub, big_t, -log_tol / (2.0 * big_t), self.terms)?;
                    for (i, v) in idx.into_iter().zip(vals) {
                        out[i] = v;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Single-period de Hoog inversion at `times` (all in `(0, big_t)`).
///
/// Transform samples that underflow to exactly zero truncate the series;
/// the remaining coefficients carry all resolvable information.
pub fn invert_dehoog<F>(
    mut transform: F,
    times: &[f64],
    big_t: f64,
    shift: f64,
    terms: usize,
) -> Result<Vec<f64>>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let m = terms;
    let mut a = Vec::with_capacity(2 * m + 1);
    for k in 0..=2 * m {
        let s = Complex64::new(shift, std::f64::consts::PI * k as f64 / big_t);
        let v = transform(s)?;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFiniteTransform { s });
        }
        a.push(v);
    }
    let zero = Complex64::new(0.0, 0.0);
    let usable = a.iter().position(|&v| v == zero).unwrap_or(a.len());
    let m = if usable < a.len() { usable.saturating_sub(1) / 2 } else { m };
    if m == 0 {
        return Ok(vec![0.0; times.len()]);
    }
    a.truncate(2 * m + 1);
    a[0] *= 0.5;
    // the QD table is scale invariant apart from d_0
    let scale = a[0].norm();
    a.iter_mut().for_each(|v| *v /= scale);
    let mut d = continued_fraction(&a, m);
    d[0] *= scale;
    // a breakdown deep in the QD table only costs the trailing terms
    let m = match d.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        Some(bad) => (bad - 1) / 2,
        None => m,
    };
    if m == 0 {
        return Err(Error::InversionBreakdown { t: times.first().copied().unwrap_or(0.0) });
    }

    times
        .iter()
        .map(|&t| {
            let v = evaluate_fraction(&d, m, t, big_t, shift);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InversionBreakdown { t })
            }
        })
        .collect()
}

/// Quotient-difference algorithm: continued-fraction coefficients `d_0..d_2M`
/// of the power series `sum a_k z^k`.
fn continued_fraction(a: &[Complex64], m: usize) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    // e[r][i], q[r][i] hold column r of the QD table
    let mut e_prev = vec![zero; 2 * m + 1];
    let mut q_col: Vec<Complex64> = (0..2 * m).map(|i| div(a[i + 1], a[i])).collect();
    let mut d = vec![zero; 2 * m + 1];
    d[0] = a[0];
    for r in 1..=m {
        let n = 2 * (m - r) + 1;
        let e_col: Vec<Complex64> = (0..n).map(|i| q_col[i + 1] - q_col[i] + e_prev[i + 1]).collect();
        d[2 * r - 1] = -q_col[0];
        d[2 * r] = -e_col[0];
        if r < m {
            let nn = 2 * (m - r - 1) + 2;
            q_col = (0..nn).map(|i| div(q_col[i + 1] * e_col[i + 1], e_col[i])).collect();
        }
        e_prev = e_col;
    }
    d
}

/// Complex division without squaring the divisor (Smith's method).
fn div(a: Complex64, b: Complex64) -> Complex64 {
    if b.re.abs() >= b.im.abs() {
        let r = b.im / b.re;
        let den = b.re + b.im * r;
        Complex64::new((a.re + a.im * r) / den, (a.im - a.re * r) / den)
    } else {
        let r = b.re / b.im;
        let den = b.re * r + b.im;
        Complex64::new((a.re * r + a.im) / den, (a.im * r - a.re) / den)
    }
}

fn evaluate_fraction(d: &[Complex64], m: usize, t: f64, big_t: f64, shift: f64) -> f64 {
    let one = Complex64::new(1.0, 0.0);
    let z = Complex64::from_polar(1.0, std::f64::consts::PI * t / big_t);
    // A_{n-2}, A_{n-1} and the same for B
    let (mut a2, mut a1) = (Complex64::new(0.0, 0.0), d[0]);
    let (mut b2, mut b1) = (one, one);
    for n in 2..=2 * m {
        let dz = d[n - 1] * z;
        let a0 = a1 + dz * a2;
        let b0 = b1 + dz * b2;
        a2 = a1;
        a1 = a0;
        b2 = b1;
        b1 = b0;
        let scale = b1.norm();
        if scale > 1e100 {
            a1 /= scale;
            a2 /= scale;
            b1 /= scale;
            b2 /= scale;
        }
    }
    // remainder estimate for the tail of the fraction
    let h = 0.5 * (one + (d[2 * m - 1] - d[2 * m]) * z);
    let r = -h * (one - (one + d[2 * m] * z / (h * h)).sqrt());
    let a_end = a1 + r * a2;
    let b_end = b1 + r * b2;
    (shift * t).exp() / big_t * div(a_end, b_end).re
}
