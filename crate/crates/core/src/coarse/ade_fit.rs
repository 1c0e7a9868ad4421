use super::lsq::{multistart, LsqOptions};
use super::{check_mass, peclet_from_width};
use crate::curve::MeasuredCurve;
use crate::error::{Error, Result};
use crate::laplace::{ade_analytical, Formulation};
use crate::result::{EstimationResult, Method};

const PEAK_MAX_ITER: usize = 200;
const PEAK_TOL: f64 = 1e-8;

/// Two-parameter least squares of the infinite-domain closed form against
/// the normalized, interval-weighted record.
pub fn ade_ls_fit(curve: &MeasuredCurve) -> Result<EstimationResult> {
    check_mass(curve)?;
    let deltas = curve.deltas();
    let mass = curve.weighted_mass();
    let p: Vec<f64> = curve.concentrations.iter().zip(&deltas).map(|(c, d)| c * d / mass).collect();
    let length = curve.reach_length;
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let (v, pe) = (x[0].exp(), x[1].exp());
        let q: Vec<f64> = curve
            .times
            .iter()
            .zip(&deltas)
            .map(|(t, d)| Ok(ade_analytical(pe, 1.0, 1.0, t * v / length, Formulation::Infinite)? * d))
            .collect::<Result<_>>()?;
        let s: f64 = q.iter().sum();
        if !(s > 0.0) {
            return Err(Error::NonFiniteLoss(x.to_vec()));
        }
        Ok(p.iter().zip(&q).map(|(a, b)| a - b / s).collect())
    };
    let v0 = curve.peak_velocity();
    let pe0 = peclet_from_width(curve);
    let starts: Vec<Vec<f64>> = [1.0, 1.0 / 3.0, 3.0].iter().map(|k| vec![v0.ln(), (pe0 * k).ln()]).collect();
    let lower = [(0.3 * v0).ln(), 0.0];
    let upper = [(3.0 * v0).ln(), 1e7f64.ln()];
    let fit = multistart(residual, &starts, &lower, &upper, &LsqOptions::default())?;
    let mut r = EstimationResult::ade(Method::AdeLs, fit.x[0].exp(), length, fit.x[1].exp());
    r.converged = fit.converged;
    Ok(r)
}

/// `c'' / c` at the sampled peak from the three bracketing samples.
fn curvature_ratio(curve: &MeasuredCurve) -> Result<(f64, f64)> {
    if !curve.peak_is_interior() {
        return Err(Error::InvalidCurve("peak is not inside the record".into()));
    }
    let i = curve.peak_index();
    let (t, c) = (&curve.times, &curve.concentrations);
    if c[i + 1] == c[i] {
        return Err(Error::Estimation("flat-topped peak has no curvature".into()));
    }
    let (hm, hp) = (t[i] - t[i - 1], t[i + 1] - t[i]);
    let second = 2.0 * ((c[i + 1] - c[i]) / hp - (c[i] - c[i - 1]) / hm) / (hm + hp);
    Ok((t[i], second / c[i]))
}

/// Matches the peak time and the curvature ratio at the peak by fixed-point
/// iteration on `(v, D)`. `initial_d` defaults to a width estimate.
pub fn ade_peak_fit(curve: &MeasuredCurve, initial_d: Option<f64>) -> Result<EstimationResult> {
    check_mass(curve)?;
    let (tp, ratio) = curvature_ratio(curve)?;
    if !(ratio < 0.0) {
        return Err(Error::Estimation("curvature at the peak is not negative".into()));
    }
    let l = curve.reach_length;
    let mut v = l / tp;
    let mut d = initial_d.unwrap_or_else(|| l * v / peclet_from_width(curve));
    let mut converged = false;
    for _ in 0..PEAK_MAX_ITER {
        // b is the model peak travel distance in units of L
        let b = ((d * d / (v * v) + l * l).sqrt() - d / v) / l;
        let (b2, b4) = (b * b, b.powi(4));
        let rad = 4.0 * b4 * (b2 - 1.0).powi(2) * ratio * v.powi(4) * l.powi(4) - 2.0 * b2 * (b4 - 3.0) * v.powi(6) * l * l;
        let den = 2.0 * b2 * (4.0 * ratio * b2 * l * l - 3.0 * v * v);
        if rad < 0.0 || den == 0.0 {
            return Err(Error::Estimation("peak fit left the real domain".into()));
        }
        let d_new = (b * (b2 - 3.0) * v.powi(3) * l - rad.sqrt()) / den;
        let radicand = l * l - 2.0 * tp * d_new;
        if !(d_new > 0.0) || radicand < 0.0 {
            return Err(Error::Estimation(format!("dispersion {d_new} makes the velocity undefined")));
        }
        v = radicand.sqrt() / tp;
        let change = (d_new - d).abs() / d_new;
        d = d_new;
        if change < PEAK_TOL {
            converged = true;
            break;
        }
    }
    let mut r = EstimationResult::ade(Method::AdePeak, v, l, l * v / d);
    r.converged = converged;
    Ok(r)
}
