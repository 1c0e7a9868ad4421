//! Forward-model refinement of an estimate inside a narrowed box.

use crate::curve::MeasuredCurve;
use crate::error::{Error, Result};
use crate::kernel::Family;
use crate::laplace::Formulation;
use crate::lipo::{lipo_minimize, SearchBox};
use crate::metrics;
use crate::prior::{DimensionlessParams, LogNormalPrior};
use crate::result::{EstimationResult, Method};

pub const DEFAULT_BUDGET: usize = 300;
/// Relative half-widths of the refinement box.
pub const VELOCITY_SPAN: f64 = 0.02;
pub const PARAM_SPAN: f64 = 0.30;

fn upper_third(family: Family, x: f64) -> f64 {
    match family {
        Family::FirstOrder => x,
        Family::PowerLaw => x.min(0.9999f64.ln()),
    }
}

/// `(ln v, ln y)` box: `v` within 2% and every `y` within 30%.
pub fn refinement_box(initial: &EstimationResult, budget: usize, seed: u64) -> Result<SearchBox> {
    let y = initial.params.as_ref().ok_or_else(|| Error::InvalidParameter("refinement needs memory parameters".into()))?;
    let v = initial.velocity;
    let mut lower = vec![(v * (1.0 - VELOCITY_SPAN)).ln()];
    let mut upper = vec![(v * (1.0 + VELOCITY_SPAN)).ln()];
    for p in y.values {
        lower.push((p * (1.0 - PARAM_SPAN)).ln());
        upper.push((p * (1.0 + PARAM_SPAN)).ln());
    }
    upper[3] = upper_third(y.family, upper[3]);
    SearchBox::new(lower, upper, budget, seed)
}

/// Wide box from a fitted prior: four prior standard deviations per log
/// parameter and `v` in `[0.9, 1.5] L / t_peak`.
pub fn prior_box(prior: &LogNormalPrior, family: Family, v_peak: f64, budget: usize, seed: u64) -> Result<SearchBox> {
    let mut lower = vec![(0.9 * v_peak).ln()];
    let mut upper = vec![(1.5 * v_peak).ln()];
    for i in 0..3 {
        let sd = prior.sigma_log[i][i].sqrt();
        lower.push(prior.mu_log[i] - 4.0 * sd);
        upper.push(prior.mu_log[i] + 4.0 * sd);
    }
    upper[3] = upper_third(family, upper[3]);
    SearchBox::new(lower, upper, budget, seed)
}

/// RMSE of the forward model at `(ln v, ln y)` against the curve.
pub fn rmse_loss(curve: &MeasuredCurve, family: Family, formulation: Formulation, x: &[f64]) -> Result<f64> {
    let y = DimensionlessParams::from_log(family, [x[1], x[2], x[3]])?;
    let r = EstimationResult::new(Method::Lipo, formulation, x[0].exp(), curve.reach_length, y);
    metrics::rmse(curve, &r.model_at(&curve.times)?)
}

/// Runs the global search over `bx` and returns the incumbent as a result.
pub fn lipo_estimate(
    curve: &MeasuredCurve,
    family: Family,
    formulation: Formulation,
    bx: &SearchBox,
    method: Method,
) -> Result<EstimationResult> {
    let best = lipo_minimize(|x| rmse_loss(curve, family, formulation, x), bx)?;
    let x = &best.x;
    let y = DimensionlessParams::from_log(family, [x[1], x[2], x[3]])?;
    EstimationResult::new(method, formulation, x[0].exp(), curve.reach_length, y).with_metrics(curve)
}

/// Refines `initial` and returns whichever of the two fits the curve better.
pub fn refine(initial: &EstimationResult, curve: &MeasuredCurve, budget: usize, seed: u64) -> Result<EstimationResult> {
    if budget == 0 {
        return Ok(initial.clone());
    }
    let y = initial.params.as_ref().ok_or_else(|| Error::InvalidParameter("refinement needs memory parameters".into()))?;
    let method = if initial.method == Method::Pbi { Method::PbiLipo } else { Method::Lipo };
    let bx = refinement_box(initial, budget.max(6), seed)?;
    let start = initial.clone().with_metrics(curve)?;
    let refined = lipo_estimate(curve, y.family, initial.formulation, &bx, method)?;
    let (a, b) = (start.rmse().unwrap_or(f64::INFINITY), refined.rmse().unwrap_or(f64::INFINITY));
    if b < a {
        Ok(refined)
    } else {
        Ok(EstimationResult { method, ..start })
    }
}
