//! Forward-solver-free estimators: Laplace-domain fitting, moment matching
//! and advection-dispersion fits.

mod ade_fit;
mod laplace_fit;
pub mod lsq;
mod moments;
pub mod series;

pub use ade_fit::{ade_ls_fit, ade_peak_fit};
pub use laplace_fit::{laplace_fit, laplace_signature, numeric_laplace, LaplaceSignature};
pub use moments::{analytical_moments, measured_moments, moment_match, MomentSet};

use serde::{Deserialize, Serialize};

use crate::curve::MeasuredCurve;
use crate::error::{Error, Result};
use crate::kernel::Family;
use crate::laplace::Formulation;
use crate::prior::DimensionlessParams;
use crate::result::{EstimationResult, Method};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseOptions {
    /// Laplace abscissas span `[lo, hi] / t_peak`.
    pub abscissa_range: (f64, f64),
    pub n_abscissas: usize,
    /// Center of the multistart pattern; neutral defaults otherwise.
    pub center: Option<DimensionlessParams>,
}

impl Default for CoarseOptions {
    fn default() -> Self {
        CoarseOptions { abscissa_range: (0.1, 20.0), n_abscissas: 20, center: None }
    }
}

/// Runs one coarse method. Results carry fit metrics against the curve.
pub fn estimate(
    curve: &MeasuredCurve,
    method: Method,
    family: Family,
    formulation: Formulation,
    opts: &CoarseOptions,
) -> Result<EstimationResult> {
    let r = match method {
        Method::LaplaceFit => laplace_fit(curve, family, formulation, opts)?,
        Method::Moments => {
            if family != Family::FirstOrder {
                return Err(Error::FamilyMismatch { expected: "first_order".into(), got: family.to_string() });
            }
            moment_match(curve, formulation, opts)?
        }
        Method::AdeLs => ade_ls_fit(curve)?,
        Method::AdePeak => ade_peak_fit(curve, None)?,
        other => return Err(Error::InvalidParameter(format!("{other} is not a coarse method"))),
    };
    r.with_metrics(curve)
}

/// `sign(m) |m|^(1/k)`.
pub fn signed_root(m: f64, k: i32) -> f64 {
    m.signum() * m.abs().powf(1.0 / k as f64)
}

/// `2 / (sigma_t / t_peak)^2` with `sigma_t` from the half-maximum width.
pub(crate) fn peclet_from_width(curve: &MeasuredCurve) -> f64 {
    let i = curve.peak_index();
    let (t, c) = (&curve.times, &curve.concentrations);
    let half = 0.5 * c[i];
    let mut left = t[0];
    for j in (0..i).rev() {
        if c[j] <= half {
            left = t[j] + (half - c[j]) / (c[j + 1] - c[j]) * (t[j + 1] - t[j]);
            break;
        }
    }
    let mut right = t[t.len() - 1];
    for j in i + 1..t.len() {
        if c[j] <= half {
            right = t[j - 1] + (c[j - 1] - half) / (c[j - 1] - c[j]) * (t[j] - t[j - 1]);
            break;
        }
    }
    let sigma = (right - left).max(f64::MIN_POSITIVE) / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
    (2.0 / (sigma / t[i]).powi(2)).clamp(2.0, 1e6)
}

/// Log-space box of `(ln v, ln y)`.
pub(crate) fn log_bounds(family: Family, v_peak: f64) -> (Vec<f64>, Vec<f64>) {
    let third = match family {
        Family::FirstOrder => (1e-6f64, 1e4f64),
        Family::PowerLaw => (1e-4, 0.9999),
    };
    let lower = vec![(0.3 * v_peak).ln(), 1f64.ln(), 1e-8f64.ln(), third.0.ln()];
    let upper = vec![(3.0 * v_peak).ln(), 1e7f64.ln(), 1e4f64.ln(), third.1.ln()];
    (lower, upper)
}

/// Five starting points in `(ln v, ln y)` around the center.
pub(crate) fn starts(curve: &MeasuredCurve, family: Family, center: Option<&DimensionlessParams>) -> Vec<Vec<f64>> {
    let v0 = curve.peak_velocity();
    let [pe, b, c] = match center {
        Some(p) if p.family == family => p.values,
        _ => match family {
            Family::FirstOrder => [peclet_from_width(curve), 0.3, 1.0],
            Family::PowerLaw => [peclet_from_width(curve), 0.3, 0.5],
        },
    };
    let third = |k: f64| match family {
        Family::FirstOrder => c * k,
        Family::PowerLaw => (c * k).min(0.95),
    };
    [
        (1.0, 1.0, 1.0, 1.0),
        (1.0, 3.0, 1.0 / 3.0, 3.0),
        (0.95, 1.0 / 3.0, 3.0, 1.0 / 3.0),
        (1.05, 1.0, 0.1, 1.5),
        (1.0, 10.0, 2.0, 0.5),
    ]
    .iter()
    .map(|&(kv, kp, kb, kc)| vec![(v0 * kv).ln(), (pe * kp).ln(), (b * kb).ln(), third(kc).ln()])
    .collect()
}

/// Unpacks `(ln v, ln y)`.
pub(crate) fn unpack(family: Family, x: &[f64]) -> Result<(f64, DimensionlessParams)> {
    Ok((x[0].exp(), DimensionlessParams::from_log(family, [x[1], x[2], x[3]])?))
}

pub(crate) fn check_mass(curve: &MeasuredCurve) -> Result<()> {
    curve.validate()?;
    if !(curve.weighted_mass() > 0.0) {
        return Err(Error::InvalidCurve("curve has zero mass".into()));
    }
    Ok(())
}
