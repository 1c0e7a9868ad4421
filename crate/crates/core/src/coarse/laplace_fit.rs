use serde::{Deserialize, Serialize};

use super::lsq::{multistart, LsqOptions};
use super::{check_mass, log_bounds, starts, unpack, CoarseOptions};
use crate::curve::MeasuredCurve;
use crate::embedding::log_space;
use crate::error::Result;
use crate::kernel::Family;
use crate::laplace::{log_transfer, Formulation};
use crate::quadrature::trapezoid;
use crate::result::{EstimationResult, Method};

/// `f*(s) = ln(C*(s) / C*(0))` at the evaluation abscissas (1/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceSignature {
    pub abscissas: Vec<f64>,
    pub values: Vec<f64>,
}

/// Trapezoid transform `int c(t) e^(-s t) dt` of the padded curve.
pub fn numeric_laplace(curve: &MeasuredCurve, s: f64) -> f64 {
    let p = curve.pad_with_zeros();
    let y: Vec<f64> = p.times.iter().zip(&p.concentrations).map(|(t, c)| c * (-s * t).exp()).collect();
    trapezoid(&p.times, &y)
}

pub fn laplace_signature(curve: &MeasuredCurve, opts: &CoarseOptions) -> LaplaceSignature {
    let tp = curve.peak_time();
    let abscissas = log_space(opts.abscissa_range.0 / tp, opts.abscissa_range.1 / tp, opts.n_abscissas);
    let c0 = numeric_laplace(curve, 0.0);
    let values = abscissas.iter().map(|&s| (numeric_laplace(curve, s) / c0).ln()).collect();
    LaplaceSignature { abscissas, values }
}

/// Least squares of the normalized log-transform over `(ln v, ln y)`.
pub fn laplace_fit(
    curve: &MeasuredCurve,
    family: Family,
    formulation: Formulation,
    opts: &CoarseOptions,
) -> Result<EstimationResult> {
    check_mass(curve)?;
    let sig = laplace_signature(curve, opts);
    let length = curve.reach_length;
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let (v, y) = unpack(family, x)?;
        let params = y.transport()?;
        sig.abscissas
            .iter()
            .zip(&sig.values)
            .map(|(&s, &f)| Ok(log_transfer(&params, formulation, s * length / v)? - f))
            .collect()
    };
    let (lower, upper) = log_bounds(family, curve.peak_velocity());
    let fit = multistart(residual, &starts(curve, family, opts.center.as_ref()), &lower, &upper, &LsqOptions::default())?;
    let (v, y) = unpack(family, &fit.x)?;
    let mut r = EstimationResult::new(Method::LaplaceFit, formulation, v, length, y);
    r.converged = fit.converged;
    Ok(r)
}
