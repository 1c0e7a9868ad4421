//! MAP embedding of a measured curve into KL-coefficient space as a function
//! of the candidate velocity.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{MeasuredCurve, VelocityGrid};
use crate::error::{Error, Result};
use crate::kl::{KlCoefficients, KlModel};

/// Coefficients `Z*(v)` for every grid velocity; `None` marks velocities
/// that place the record outside the synthetic window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedCurve {
    pub grid: VelocityGrid,
    pub coefficients: Vec<Option<KlCoefficients>>,
    pub sigma_c: f64,
    pub reach_length: f64,
}

impl EmbeddedCurve {
    pub fn feasible(&self) -> impl Iterator<Item = (usize, f64, &KlCoefficients)> {
        self.grid
            .velocities
            .iter()
            .zip(&self.coefficients)
            .enumerate()
            .filter_map(|(m, (&v, z))| z.as_ref().map(|z| (m, v, z)))
    }
}

/// Least-squares system of one velocity: `b ~ A Z`.
#[derive(Debug, Clone)]
pub struct Design {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// `sum_j mean(tau_j) Delta_j`.
    pub model_mass: f64,
}

/// Builds the design at velocity `v` for an already padded curve.
pub fn design(curve: &MeasuredCurve, kl: &KlModel, v: f64) -> Result<Design> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::InvalidParameter(format!("velocity must be > 0, got {v}")));
    }
    let deltas = curve.deltas();
    let taus: Vec<f64> = curve.times.iter().map(|t| t * v / curve.reach_length).collect();
    let t_end = kl.grid.t_max();
    if taus.iter().all(|&t| t > t_end) {
        return Err(Error::InfeasibleVelocity(v));
    }
    let mean: Vec<f64> = taus.iter().map(|&t| kl.mean_at(t)).collect();
    let s: f64 = mean.iter().zip(&deltas).map(|(m, d)| m * d).sum();
    let data_mass = curve.weighted_mass();
    if !(s > 0.0) {
        return Err(Error::InfeasibleVelocity(v));
    }
    if !(data_mass > 0.0) {
        return Err(Error::InvalidCurve("curve has zero mass".into()));
    }
    let n = curve.len();
    let a = DMatrix::from_fn(n, kl.n_modes(), |i, j| kl.mode_at(j, taus[i]) * deltas[i] / s);
    let b = DVector::from_fn(n, |i, _| curve.concentrations[i] * deltas[i] / data_mass - mean[i] * deltas[i] / s);
    Ok(Design { a, b, model_mass: s })
}

/// Minimizer of `|b - A Z|^2 / (N sigma_c^2) + Z^T diag(lambda)^-1 Z`.
pub fn solve_map(design: &Design, eigenvalues: &[f64], sigma_c: f64) -> Result<KlCoefficients> {
    let (h, rhs) = normal_equations(design, eigenvalues, sigma_c)?;
    let z = h
        .cholesky()
        .ok_or_else(|| Error::Estimation("MAP normal matrix is not positive definite".into()))?
        .solve(&rhs);
    Ok(KlCoefficients(z.iter().copied().collect()))
}

/// Normal matrix and right-hand side of the MAP problem.
pub fn normal_equations(design: &Design, eigenvalues: &[f64], sigma_c: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if !(sigma_c > 0.0 && sigma_c.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma_c must be > 0, got {sigma_c}")));
    }
    let w = 1.0 / (design.a.nrows() as f64 * sigma_c * sigma_c);
    let mut h = design.a.tr_mul(&design.a) * w;
    for (j, l) in eigenvalues.iter().enumerate() {
        h[(j, j)] += 1.0 / l;
    }
    let rhs = design.a.tr_mul(&design.b) * w;
    Ok((h, rhs))
}

/// `Z*(v)` for a padded curve.
pub fn embed(curve: &MeasuredCurve, kl: &KlModel, v: f64, sigma_c: f64) -> Result<KlCoefficients> {
    solve_map(&design(curve, kl, v)?, &kl.eigenvalues, sigma_c)
}

/// Embeds a curve at every grid velocity. The curve is padded here.
pub fn embed_over_velocities(
    curve: &MeasuredCurve,
    kl: &KlModel,
    grid: &VelocityGrid,
    sigma_c: f64,
) -> Result<EmbeddedCurve> {
    let padded = curve.pad_with_zeros();
    let coefficients = grid
        .velocities
        .par_iter()
        .map(|&v| match embed(&padded, kl, v, sigma_c) {
            Ok(z) => Ok(Some(z)),
            Err(Error::InfeasibleVelocity(_)) => Ok(None),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let skipped = coefficients.iter().filter(|z| z.is_none()).count();
    if skipped > 0 {
        log::warn!("{skipped} of {} velocities are infeasible for this curve", grid.len());
    }
    Ok(EmbeddedCurve { grid: grid.clone(), coefficients, sigma_c, reach_length: curve.reach_length })
}

/// 41 log-spaced values in `[1e-9, 1e1]`, four per decade.
pub fn default_sigma_candidates() -> Vec<f64> {
    log_space(1e-9, 1e1, 41)
}

pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// Validation score of every candidate (geometric mean over curves).
pub fn sigma_c_scores(curves: &[MeasuredCurve], kl: &KlModel, candidates: &[f64], seed: u64) -> Result<Vec<f64>> {
    if candidates.is_empty() {
        return Err(Error::InvalidParameter("no sigma_c candidates".into()));
    }
    if curves.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, have: 0 });
    }
    let splits: Vec<Split> = curves
        .iter()
        .enumerate()
        .map(|(k, c)| split_curve(c, kl, seed.wrapping_add(k as u64)))
        .collect::<Result<_>>()?;
    candidates
        .par_iter()
        .map(|&sigma| {
            let mut log_sum = 0.0;
            for sp in &splits {
                let z = solve_map(&sp.design, &kl.eigenvalues, sigma)?;
                let err = sp.validation_error(kl, &z);
                log_sum += err.max(f64::MIN_POSITIVE).ln();
            }
            Ok((log_sum / splits.len() as f64).exp())
        })
        .collect()
}

/// Picks `sigma_c` by 80/20 hold-out validation at the peak velocity.
pub fn tune_sigma_c(curves: &[MeasuredCurve], kl: &KlModel, candidates: &[f64], seed: u64) -> Result<f64> {
    if candidates.len() == 1 {
        return Ok(candidates[0]);
    }
    let scores = sigma_c_scores(curves, kl, candidates, seed)?;
    let best = scores
        .iter()
        .enumerate()
        .fold(0, |best, (i, s)| if *s < scores[best] { i } else { best });
    Ok(candidates[best])
}

struct Split {
    design: Design,
    data_mass: f64,
    /// held-out (dimensionless time, concentration)
    held_out: Vec<(f64, f64)>,
}

impl Split {
    fn validation_error(&self, kl: &KlModel, z: &[f64]) -> f64 {
        let sq: f64 = self
            .held_out
            .iter()
            .map(|&(tau, c)| {
                let model = kl.mean_at(tau) + z.iter().enumerate().map(|(j, zj)| zj * kl.mode_at(j, tau)).sum::<f64>();
                let r = c / self.data_mass - model / self.design.model_mass;
                r * r
            })
            .sum();
        (sq / self.held_out.len() as f64).sqrt()
    }
}

fn split_curve(curve: &MeasuredCurve, kl: &KlModel, seed: u64) -> Result<Split> {
    let nonzero: Vec<usize> = (0..curve.len()).filter(|&i| curve.concentrations[i] > 0.0).collect();
    if nonzero.len() < 5 {
        return Err(Error::InvalidCurve(format!(
            "sigma_c tuning needs at least 5 nonzero samples per curve, got {}",
            nonzero.len()
        )));
    }
    let mut shuffled = nonzero;
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_val = ((shuffled.len() as f64) * 0.2).round().max(1.0) as usize;
    let mut held: Vec<usize> = shuffled[..n_val].to_vec();
    held.sort_unstable();
    let keep: Vec<usize> = (0..curve.len()).filter(|i| held.binary_search(i).is_err()).collect();
    let train = MeasuredCurve {
        times: keep.iter().map(|&i| curve.times[i]).collect(),
        concentrations: keep.iter().map(|&i| curve.concentrations[i]).collect(),
        ..curve.clone()
    }
    .pad_with_zeros();
    let v = curve.peak_velocity();
    let design = design(&train, kl, v)?;
    let scale = v / curve.reach_length;
    Ok(Split {
        design,
        data_mass: train.weighted_mass(),
        held_out: held.iter().map(|&i| (curve.times[i] * scale, curve.concentrations[i])).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::TimeGrid;
    use crate::kl::fit_kl_curves;
    use rand::Rng;

    fn model() -> KlModel {
        let grid = TimeGrid::new(0.05, 481).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut curves = Vec::new();
        for _ in 0..80 {
            let (mu, s) = (rng.random_range(0.8..1.2), rng.random_range(0.08..0.2));
            let norm = 1.0 / (s * (2.0 * std::f64::consts::PI).sqrt());
            curves.extend(grid.times().iter().map(|t| norm * (-(t - mu) * (t - mu) / (2.0 * s * s)).exp()));
        }
        fit_kl_curves(grid, &curves, 6).unwrap()
    }

    fn sampled(kl: &KlModel, z: &[f64], v: f64, length: f64) -> MeasuredCurve {
        let dense = kl.reconstruct(z).unwrap();
        let times: Vec<f64> = (1..=60).map(|i| i as f64 * 20.0).collect();
        let conc = times
            .iter()
            .map(|t| crate::quadrature::interp_uniform(&dense, kl.grid.step, t * v / length).max(0.0))
            .collect();
        MeasuredCurve::new(times, conc, length).unwrap()
    }

    #[test]
    fn mean_curve_embeds_at_origin() {
        let kl = model();
        let c = sampled(&kl, &[0.0; 6], 1.0, 600.0).pad_with_zeros();
        let z = embed(&c, &kl, 1.0, 1e-3).unwrap();
        assert!(z.iter().all(|x| x.abs() < 1e-3 * kl.eigenvalues[0].sqrt()), "{z:?}");
    }

    #[test]
    fn prior_dominates_for_large_sigma() {
        let kl = model();
        let z0: Vec<f64> = kl.eigenvalues.iter().map(|l| 0.5 * l.sqrt()).collect();
        let c = sampled(&kl, &z0, 1.0, 600.0).pad_with_zeros();
        let near = embed(&c, &kl, 1.0, 1e-6).unwrap();
        let far = embed(&c, &kl, 1.0, 1e6).unwrap();
        let norm = |z: &KlCoefficients| z.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&far) < 1e-6 * norm(&near));
        // monotone in sigma_c
        let mut last = f64::INFINITY;
        for s in log_space(1e-5, 1e2, 15) {
            let n = norm(&embed(&c, &kl, 1.0, s).unwrap());
            assert!(n <= last * (1.0 + 1e-9));
            last = n;
        }
    }

    #[test]
    fn normal_equations_hold_and_scale_invariant() {
        let kl = model();
        let z0: Vec<f64> = kl.eigenvalues.iter().map(|l| -0.3 * l.sqrt()).collect();
        let c = sampled(&kl, &z0, 1.1, 600.0).pad_with_zeros();
        let d = design(&c, &kl, 1.05).unwrap();
        let z = solve_map(&d, &kl.eigenvalues, 0.01).unwrap();
        let (h, rhs) = normal_equations(&d, &kl.eigenvalues, 0.01).unwrap();
        let r = &h * DVector::from_column_slice(&z) - &rhs;
        assert!(r.norm() <= 1e-10 * rhs.norm().max(1e-300));
        let zs = embed(&c.scaled(37.0), &kl, 1.05, 0.01).unwrap();
        assert!(z.iter().zip(zs.iter()).all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + a.abs())));
    }

    #[test]
    fn round_trip_recovers_coefficients() {
        let kl = model();
        let z0: Vec<f64> = kl.eigenvalues.iter().enumerate().map(|(j, l)| (0.4 - 0.1 * j as f64) * l.sqrt()).collect();
        let v = 1.0;
        let grid = kl.grid;
        let dense = kl.reconstruct(&z0).unwrap();
        // dense sampling on the model grid itself
        let times: Vec<f64> = (0..grid.count).map(|i| grid.time(i) * 600.0 / v).collect();
        let c = MeasuredCurve::new(times, dense.iter().map(|x| x.max(0.0)).collect(), 600.0).unwrap();
        if dense.iter().any(|&x| x < 0.0) {
            return;
        }
        let z = embed(&c, &kl, v, 1e-7).unwrap();
        for j in 0..kl.n_modes() {
            if z0[j].abs() > 1e-2 * kl.eigenvalues[0].sqrt() {
                assert!(((z[j] - z0[j]) / z0[j]).abs() < 1e-3, "mode {j}: {} vs {}", z[j], z0[j]);
            }
        }
    }

    #[test]
    fn sigma_tuning_is_deterministic() {
        let kl = model();
        let curves: Vec<MeasuredCurve> = (0..3)
            .map(|k| sampled(&kl, &kl.eigenvalues.iter().map(|l| 0.2 * k as f64 * l.sqrt()).collect::<Vec<_>>(), 1.0, 600.0))
            .collect();
        let cands = default_sigma_candidates();
        let a = tune_sigma_c(&curves, &kl, &cands, 3).unwrap();
        let b = tune_sigma_c(&curves, &kl, &cands, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(tune_sigma_c(&curves, &kl, &[0.5], 3).unwrap(), 0.5);
        assert!(tune_sigma_c(&curves, &kl, &[], 3).is_err());
    }
}
