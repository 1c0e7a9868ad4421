use serde::{Deserialize, Serialize};

use super::lsq::{multistart, LsqOptions};
use super::series::Series;
use super::{check_mass, log_bounds, signed_root, starts, unpack, CoarseOptions};
use crate::curve::MeasuredCurve;
use crate::error::{Error, Result};
use crate::kernel::Family;
use crate::laplace::Formulation;
use crate::prior::DimensionlessParams;
use crate::quadrature::trapezoid;
use crate::result::{EstimationResult, Method};

/// Mean arrival time and central moments of orders 2 to 4 (s, s^k).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl MomentSet {
    pub fn as_array(&self) -> [f64; 4] {
        [self.m1, self.m2, self.m3, self.m4]
    }

    /// Moments of `t * k`.
    pub fn rescaled(&self, k: f64) -> MomentSet {
        MomentSet { m1: self.m1 * k, m2: self.m2 * k.powi(2), m3: self.m3 * k.powi(3), m4: self.m4 * k.powi(4) }
    }
}

/// Trapezoid moments of the padded record.
pub fn measured_moments(curve: &MeasuredCurve) -> Result<MomentSet> {
    let p = curve.pad_with_zeros();
    let t = &p.times;
    let weighted = |f: &dyn Fn(f64) -> f64| -> f64 {
        let y: Vec<f64> = t.iter().zip(&p.concentrations).map(|(&t, c)| f(t) * c).collect();
        trapezoid(t, &y)
    };
    let mass = weighted(&|_| 1.0);
    if !(mass > 0.0) {
        return Err(Error::InvalidCurve("curve has zero mass".into()));
    }
    let m1 = weighted(&|t| t) / mass;
    let central = |k: i32| weighted(&|t| (t - m1).powi(k)) / mass;
    Ok(MomentSet { m1, m2: central(2), m3: central(3), m4: central(4) })
}

/// Dimensionless central moments at `x = 1` from the series of `e^(m1 s) C(s)`.
pub fn dimensionless_moments(y: &DimensionlessParams, formulation: Formulation) -> Result<MomentSet> {
    if y.family != Family::FirstOrder {
        return Err(Error::FamilyMismatch { expected: "first_order".into(), got: y.family.to_string() });
    }
    let [pe, bkf, kr] = y.values;
    type S = Series<5>;
    // s' = s (1 + beta k_f / (k_r + s))
    let g = S::linear(kr, 1.0).recip().scale(bkf);
    let s_eff = (S::constant(1.0) + g).shift();
    let root = (s_eff.scale(4.0) + S::constant(pe)).sqrt();
    let exponent = (S::constant(pe) + root.scale(-pe.sqrt())).scale(0.5);
    let b = match formulation {
        Formulation::SemiInfNoUpstream => S::constant(1.0),
        Formulation::SemiInfUpstream => (S::constant(0.5) + root.scale(0.5 / pe.sqrt())).recip(),
        Formulation::Infinite | Formulation::SemiInfEquivInfinite => root.recip().scale(pe.sqrt()),
    };
    let c = b * exponent.exp();
    let mass = c.0[0];
    let m1 = -c.0[1] / mass;
    // central moments: coefficients of e^(m1 s) C(s) / mass are (-1)^k m_k / k!
    let centered = (c * S::linear(0.0, m1).exp()).scale(1.0 / mass);
    let k = |n: usize| centered.0[n] * if n.is_multiple_of(2) { 1.0 } else { -1.0 } * (1..=n).product::<usize>() as f64;
    let out = MomentSet { m1, m2: k(2), m3: k(3), m4: k(4) };
    if out.as_array().iter().any(|m| !m.is_finite()) || !(out.m2 > 0.0) {
        return Err(Error::InvalidParameter(format!("moments are not finite for {y:?}")));
    }
    Ok(out)
}

/// Dimensional central moments for velocity `v` and reach length `L`.
pub fn analytical_moments(v: f64, y: &DimensionlessParams, length: f64, formulation: Formulation) -> Result<MomentSet> {
    Ok(dimensionless_moments(y, formulation)?.rescaled(length / v))
}

/// Least squares on signed k-th roots of the first four moments.
pub fn moment_match(curve: &MeasuredCurve, formulation: Formulation, opts: &CoarseOptions) -> Result<EstimationResult> {
    check_mass(curve)?;
    let target = measured_moments(curve)?;
    if !(target.m2 > 0.0) {
        return Err(Error::InvalidCurve("measured variance is not positive".into()));
    }
    let roots: Vec<f64> = target.as_array().iter().zip(1..).map(|(&m, k)| signed_root(m, k)).collect();
    let family = Family::FirstOrder;
    let length = curve.reach_length;
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let (v, y) = unpack(family, x)?;
        let m = analytical_moments(v, &y, length, formulation)?;
        // relative to the mean arrival time keeps the scale O(1)
        Ok(m.as_array().iter().zip(1..).zip(&roots).map(|((&m, k), r)| (signed_root(m, k) - r) / roots[0]).collect())
    };
    let (lower, upper) = log_bounds(family, curve.peak_velocity());
    let fit = multistart(residual, &starts(curve, family, opts.center.as_ref()), &lower, &upper, &LsqOptions::default())?;
    let (v, y) = unpack(family, &fit.x)?;
    let mut r = EstimationResult::new(Method::Moments, formulation, v, length, y);
    r.converged = fit.converged;
    Ok(r)
}
