//! Breakthrough curves at `x = 1` obtained by inverting the Laplace-domain
//! solution.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dehoog::DeHoog;
use crate::error::{Error, Result};
use crate::laplace::{laplace_solution, Formulation, TransportParams};

/// Uniform dimensionless time grid starting at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub step: f64,
    pub count: usize,
}

impl TimeGrid {
    pub fn new(step: f64, count: usize) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || count < 2 {
            return Err(Error::InvalidParameter(format!(
                "time grid needs step > 0 and at least 2 points, got step {step}, count {count}"
            )));
        }
        Ok(TimeGrid { step, count })
    }

    /// Grid covering `[0, t_max]` with the given step.
    pub fn spanning(step: f64, t_max: f64) -> Result<Self> {
        let count = (t_max / step).round() as usize + 1;
        Self::new(step, count)
    }

    /// `dt = 1/150` on `[0, 24]`, 3601 points.
    pub fn canonical() -> Self {
        TimeGrid { step: 1.0 / 150.0, count: 3601 }
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.time(i)).collect()
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.count - 1)
    }
}

/// Inversion settings for breakthrough curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardOptions {
    /// Fixed inverter; `None` picks the term count from the Peclet number.
    pub inverter: Option<DeHoog>,
    /// Negative values down to `-noise_floor * peak` are inversion ripple.
    pub noise_floor: f64,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions { inverter: None, noise_floor: 1e-8 }
    }
}

/// Continued-fraction terms that resolve a pulse of width `~1/sqrt(Pe)`.
pub fn terms_for_peclet(pe: f64) -> usize {
    ((0.8 * pe.sqrt()).ceil() as usize).max(25)
}

/// `c(x = 1, t)` on the grid.
pub fn breakthrough(params: &TransportParams, formulation: Formulation, grid: &TimeGrid) -> Result<Vec<f64>> {
    breakthrough_at(params, formulation, &grid.times(), &ForwardOptions::default())
}

/// `c(x = 1, t)` at arbitrary times; `t <= 0` gives zero.
pub fn breakthrough_at(
    params: &TransportParams,
    formulation: Formulation,
    times: &[f64],
    options: &ForwardOptions,
) -> Result<Vec<f64>> {
    params.validate()?;
    let inverter = options
        .inverter
        .unwrap_or(DeHoog { terms: terms_for_peclet(params.peclet), ..DeHoog::default() });
    let transform = |s: Complex64| laplace_solution(params, formulation, 1.0, s);
    let mut curve = inverter.invert(transform, times)?;
    let peak = curve.iter().copied().fold(0.0, f64::max);
    let floor = options.noise_floor * peak;
    let mut worst = 0.0f64;
    for v in curve.iter_mut() {
        if *v < 0.0 {
            worst = worst.max(-*v);
            *v = 0.0;
        }
    }
    if worst > floor {
        log::warn!("inversion ripple {worst:.3e} exceeds the noise floor {floor:.3e}; clamped to zero");
    }
    Ok(curve)
}
