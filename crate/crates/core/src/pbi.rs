//! Projected barycentric interpolation and nearest-neighbor estimation on
//! the synthetic manifold in KL space.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::MeasuredCurve;
use crate::dataset::SyntheticDataset;
use crate::embedding::EmbeddedCurve;
use crate::error::{Error, Result};
use crate::kernel::Family;
use crate::kl::KlModel;
use crate::laplace::Formulation;
use crate::prior::DimensionlessParams;
use crate::quadrature::interp_uniform;
use crate::result::{EstimationResult, Method};

/// Simplex vertices: dataset indices and their KL coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub vertices: Vec<usize>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub weights: Vec<f64>,
    /// Surviving dataset indices, aligned with `weights`.
    pub vertices: Vec<usize>,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Projects `z` onto the affine hull of the simplex, dropping the vertex
/// furthest from `z` while any barycentric weight is negative.
pub fn project_onto_simplex(z: &[f64], simplex: &Simplex) -> Result<Projection> {
    if simplex.vertices.is_empty() || simplex.vertices.len() != simplex.points.len() {
        return Err(Error::InvalidParameter("simplex needs matching vertices and points".into()));
    }
    let mut vertices = simplex.vertices.clone();
    let mut points = simplex.points.clone();
    loop {
        let k = points.len();
        if k == 1 {
            return Ok(Projection { point: points[0].clone(), weights: vec![1.0], vertices });
        }
        let n = z.len();
        let last = &points[k - 1];
        let t = DMatrix::from_fn(n, k - 1, |r, c| points[c][r] - last[r]);
        let rhs = DVector::from_fn(n, |r, _| z[r] - last[r]);
        let svd = t.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let degenerate = !(smax > 0.0) || svd.singular_values.min() <= 1e-12 * smax;
        if !degenerate {
            let rho = svd.solve(&rhs, 0.0).map_err(|e| Error::Estimation(e.to_string()))?;
            let tail = 1.0 - rho.sum();
            if rho.iter().all(|&r| r >= 0.0) && tail >= 0.0 {
                let p = &t * &rho;
                let point = (0..n).map(|r| last[r] + p[r]).collect();
                let mut weights: Vec<f64> = rho.iter().copied().collect();
                weights.push(tail);
                return Ok(Projection { point, weights, vertices });
            }
        }
        let drop = furthest(z, &points, &vertices);
        vertices.remove(drop);
        points.remove(drop);
    }
}

/// Position of the vertex furthest from `z`; ties go to the lower dataset index.
fn furthest(z: &[f64], points: &[Vec<f64>], vertices: &[usize]) -> usize {
    let mut best = 0;
    let mut best_d = dist2(z, &points[0]);
    for i in 1..points.len() {
        let d = dist2(z, &points[i]);
        if d > best_d || (d == best_d && vertices[i] < vertices[best]) {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Synthetic points in KL space together with their log-parameters.
#[derive(Debug, Clone)]
pub struct Manifold {
    pub family: Family,
    pub formulation: Formulation,
    pub n_modes: usize,
    /// Row-major `len x n_modes`.
    pub coords: Vec<f64>,
    pub log_params: Vec<[f64; 3]>,
}

impl Manifold {
    pub fn new(dataset: &SyntheticDataset, kl: &KlModel) -> Result<Self> {
        if dataset.grid != kl.grid {
            return Err(Error::InvalidParameter("dataset and KL model use different grids".into()));
        }
        let coords = kl.project_all(&dataset.curves)?.into_iter().flat_map(|z| z.0).collect();
        Ok(Manifold {
            family: dataset.family,
            formulation: dataset.formulation,
            n_modes: kl.n_modes(),
            coords,
            log_params: dataset.samples.iter().map(|p| p.log()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.log_params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_params.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.n_modes..(i + 1) * self.n_modes]
    }

    /// Indices of the `k` nearest points, nearest first, ties by index.
    pub fn nearest(&self, z: &[f64], k: usize) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = (0..self.len()).map(|i| (i, dist2(z, self.point(i)))).collect();
        let k = k.min(d.len());
        let order = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
        if k < d.len() {
            d.select_nth_unstable_by(k, order);
            d.truncate(k);
        }
        d.sort_by(order);
        d
    }

    pub fn simplex(&self, z: &[f64]) -> Simplex {
        let near = self.nearest(z, 4);
        Simplex {
            vertices: near.iter().map(|(i, _)| *i).collect(),
            points: near.iter().map(|(i, _)| self.point(*i).to_vec()).collect(),
        }
    }

    /// `exp(sum rho_k ln y_k)`.
    pub fn interpolate(&self, vertices: &[usize], weights: &[f64]) -> Result<DimensionlessParams> {
        let mut logs = [0.0; 3];
        for (&i, &w) in vertices.iter().zip(weights) {
            for (l, p) in logs.iter_mut().zip(&self.log_params[i]) {
                *l += w * p;
            }
        }
        DimensionlessParams::from_log(self.family, logs)
    }
}

/// Per-velocity outcome of the PBI scan.
#[derive(Debug, Clone)]
pub struct PbiStep {
    pub velocity: f64,
    pub loss: f64,
    pub residual: f64,
    pub projection: Projection,
}

/// Projection and loss at every feasible grid velocity.
pub fn pbi_scan(embedded: &EmbeddedCurve, manifold: &Manifold, lambda_reg: Option<f64>) -> Result<Vec<PbiStep>> {
    let feasible: Vec<_> = embedded.feasible().collect();
    let v_peak = embedded.grid.peak_velocity;
    feasible
        .par_iter()
        .map(|&(_, v, z)| {
            let projection = project_onto_simplex(z, &manifold.simplex(z))?;
            let r2 = dist2(z, &projection.point);
            let penalty = lambda_reg.map_or(0.0, |l| l * (v - v_peak) * (v - v_peak));
            Ok(PbiStep { velocity: v, loss: r2 + penalty, residual: r2.sqrt(), projection })
        })
        .collect()
}

/// Lowest loss; ties go to the lowest velocity.
fn argmin_by<T>(items: &[T], key: impl Fn(&T) -> (f64, f64)) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, it) in items.iter().enumerate() {
        let (loss, v) = key(it);
        if !loss.is_finite() {
            continue;
        }
        match best {
            Some(b) => {
                let (bl, bv) = key(&items[b]);
                if loss < bl || (loss == bl && v < bv) {
                    best = Some(i);
                }
            }
            None => best = Some(i),
        }
    }
    best
}

pub fn estimate_pbi(embedded: &EmbeddedCurve, manifold: &Manifold, lambda_reg: Option<f64>) -> Result<EstimationResult> {
    let steps = pbi_scan(embedded, manifold, lambda_reg)?;
    let best = argmin_by(&steps, |s| (s.loss, s.velocity)).ok_or(Error::NoFeasibleVelocity)?;
    let step = &steps[best];
    let params = manifold.interpolate(&step.projection.vertices, &step.projection.weights)?;
    let mut r = EstimationResult::new(Method::Pbi, manifold.formulation, step.velocity, embedded.reach_length, params);
    r.residual = Some(step.residual);
    r.weights = step.projection.weights.clone();
    r.vertices = step.projection.vertices.clone();
    Ok(r)
}

/// `(index, velocity, distance)` of the closest synthetic point over all velocities.
pub fn nearest_over_velocities(embedded: &EmbeddedCurve, manifold: &Manifold) -> Result<(usize, f64, f64)> {
    let feasible: Vec<_> = embedded.feasible().collect();
    let hits: Vec<(usize, f64, f64)> = feasible
        .par_iter()
        .map(|&(_, v, z)| {
            let (i, d2) = manifold.nearest(z, 1)[0];
            (i, v, d2.sqrt())
        })
        .collect();
    let best = argmin_by(&hits, |h| (h.2, h.1)).ok_or(Error::NoFeasibleVelocity)?;
    Ok(hits[best])
}

pub fn estimate_nni(embedded: &EmbeddedCurve, manifold: &Manifold) -> Result<EstimationResult> {
    if manifold.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, have: 0 });
    }
    let (i, v, d) = nearest_over_velocities(embedded, manifold)?;
    let params = DimensionlessParams::from_log(manifold.family, manifold.log_params[i])?;
    let mut r = EstimationResult::new(Method::Nni, manifold.formulation, v, embedded.reach_length, params);
    r.residual = Some(d);
    r.weights = vec![1.0];
    r.vertices = vec![i];
    Ok(r)
}

/// Direct L2 search over dataset members and velocities, without the KL
/// model. Returns `(index, velocity, loss)`.
pub fn exhaustive_search(curve: &MeasuredCurve, dataset: &SyntheticDataset, velocities: &[f64]) -> Result<(usize, f64, f64)> {
    let deltas = curve.deltas();
    let data_mass = curve.weighted_mass();
    if !(data_mass > 0.0) {
        return Err(Error::InvalidCurve("zero mass".into()));
    }
    let p: Vec<f64> = curve.concentrations.iter().zip(&deltas).map(|(c, d)| c * d / data_mass).collect();
    let step = dataset.grid.step;
    let hits: Vec<(usize, f64, f64)> = velocities
        .par_iter()
        .filter_map(|&v| {
            let taus: Vec<f64> = curve.times.iter().map(|t| t * v / curve.reach_length).collect();
            let mut best: Option<(usize, f64, f64)> = None;
            for i in 0..dataset.len() {
                let c = dataset.curve(i);
                let q: Vec<f64> = taus.iter().zip(&deltas).map(|(&t, d)| interp_uniform(c, step, t) * d).collect();
                let s: f64 = q.iter().sum();
                if !(s > 0.0) {
                    continue;
                }
                let loss: f64 = p.iter().zip(&q).map(|(a, b)| (a - b / s) * (a - b / s)).sum();
                if best.is_none_or(|b| loss < b.2) {
                    best = Some((i, v, loss));
                }
            }
            best
        })
        .collect();
    let best = argmin_by(&hits, |h| (h.2, h.1)).ok_or(Error::NoFeasibleVelocity)?;
    Ok(hits[best])
}

/// Calibrated penalty weight and the mean relative velocity deviation it gives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationFit {
    pub lambda: f64,
    pub mean_deviation: f64,
}

pub const DEFAULT_DEVIATION_TARGET: f64 = 0.04;
const DEVIATION_TOL: f64 = 0.005;

/// Mean `|v* - v_peak| / v_peak` of regularized PBI over the curves.
pub fn mean_velocity_deviation(embedded: &[EmbeddedCurve], manifold: &Manifold, lambda: f64) -> Result<f64> {
    let devs = embedded
        .par_iter()
        .map(|e| {
            let r = estimate_pbi(e, manifold, Some(lambda))?;
            let vp = e.grid.peak_velocity;
            Ok((r.velocity - vp).abs() / vp)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(devs.iter().sum::<f64>() / devs.len() as f64)
}

/// Bisection (in log space) for the weight giving a mean velocity deviation
/// of `target` within half a percent.
pub fn regularization_weight(embedded: &[EmbeddedCurve], manifold: &Manifold, target: f64) -> Result<RegularizationFit> {
    if embedded.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, have: 0 });
    }
    if manifold.family != Family::PowerLaw {
        log::warn!("velocity regularization is intended for the power-law family");
    }
    let dev0 = mean_velocity_deviation(embedded, manifold, 0.0)?;
    if dev0 <= target + DEVIATION_TOL {
        if dev0 < target - DEVIATION_TOL {
            log::warn!("unregularized deviation {dev0:.4} is already below the target {target}");
        }
        return Ok(RegularizationFit { lambda: 0.0, mean_deviation: dev0 });
    }
    let (mut lo, mut dev_lo) = (0.0, dev0);
    let mut hi = 1.0;
    let mut dev_hi = mean_velocity_deviation(embedded, manifold, hi)?;
    let mut grow = 0;
    while dev_hi > target + DEVIATION_TOL {
        if grow == 200 {
            log::warn!("deviation target {target} unreachable; stopping at lambda = {hi:e}");
            return Ok(RegularizationFit { lambda: hi, mean_deviation: dev_hi });
        }
        lo = hi;
        dev_lo = dev_hi;
        hi *= 4.0;
        dev_hi = mean_velocity_deviation(embedded, manifold, hi)?;
        grow += 1;
    }
    if (dev_hi - target).abs() <= DEVIATION_TOL {
        return Ok(RegularizationFit { lambda: hi, mean_deviation: dev_hi });
    }
    for _ in 0..100 {
        let mid = if lo == 0.0 { hi / 1024.0 } else { (lo * hi).sqrt() };
        let dev = mean_velocity_deviation(embedded, manifold, mid)?;
        if dev > dev_lo + 1e-12 || dev < dev_hi - 1e-12 {
            log::warn!("mean deviation is not monotone in lambda near {mid:e}");
        }
        if (dev - target).abs() <= DEVIATION_TOL {
            return Ok(RegularizationFit { lambda: mid, mean_deviation: dev });
        }
        if dev > target {
            lo = mid;
            dev_lo = dev;
        } else {
            hi = mid;
            dev_hi = dev;
        }
    }
    log::warn!("bisection did not reach the deviation target");
    Ok(RegularizationFit { lambda: hi, mean_deviation: dev_hi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn simplex(points: Vec<Vec<f64>>) -> Simplex {
        Simplex { vertices: (0..points.len()).collect(), points }
    }

    #[test]
    fn interior_point_keeps_all_vertices() {
        let s = simplex(vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]);
        let p = project_onto_simplex(&[0.25, 0.25, 3.0], &s).unwrap();
        assert_eq!(p.vertices, vec![0, 1, 2]);
        for (a, b) in p.point.iter().zip([0.25, 0.25, 1.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in p.weights.iter().zip([0.5, 0.25, 0.25]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_gets_indicator() {
        let s = simplex(vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 3.0]]);
        let p = project_onto_simplex(&[2.0, 0.0], &s).unwrap();
        let w: Vec<f64> = p.vertices.iter().zip(&p.weights).filter(|(_, w)| **w > 1e-14).map(|(v, _)| *v as f64).collect();
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn outside_point_drops_furthest() {
        // segment from (0,0) to (1,0); z beyond the right end
        let s = simplex(vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        let p = project_onto_simplex(&[2.0, 1.0], &s).unwrap();
        assert_eq!(p.vertices, vec![1]);
        assert_eq!(p.point, vec![1.0, 0.0]);
    }

    #[test]
    fn degenerate_hull_falls_back() {
        let s = simplex(vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![3.0, 3.0]]);
        let p = project_onto_simplex(&[1.2, 1.0], &s).unwrap();
        assert!(p.weights.iter().all(|&w| w >= 0.0));
        assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    /// Exact QP by enumerating faces (small simplices only).
    fn exact_qp(z: &[f64], pts: &[Vec<f64>]) -> f64 {
        let k = pts.len();
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << k) {
            let idx: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            let face = simplex(idx.iter().map(|&i| pts[i].clone()).collect());
            let last = &face.points[face.points.len() - 1];
            let t = DMatrix::from_fn(z.len(), idx.len() - 1, |r, c| face.points[c][r] - last[r]);
            let rhs = DVector::from_fn(z.len(), |r, _| z[r] - last[r]);
            let rho = if idx.len() == 1 { DVector::zeros(0) } else { t.clone().svd(true, true).solve(&rhs, 1e-14).unwrap() };
            if rho.iter().any(|&r| r < -1e-12) || rho.sum() > 1.0 + 1e-12 {
                continue;
            }
            let p = &t * &rho;
            let d: f64 = (0..z.len()).map(|r| (z[r] - last[r] - p[r]).powi(2)).sum();
            best = best.min(d);
        }
        best
    }

    #[test]
    fn greedy_contract_against_exact_qp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut agree = 0;
        for _ in 0..100 {
            let pts: Vec<Vec<f64>> = (0..4).map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let z: Vec<f64> = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
            let p = project_onto_simplex(&z, &simplex(pts.clone())).unwrap();
            assert!(p.weights.iter().all(|&w| w >= 0.0));
            assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let d = dist2(&z, &p.point);
            let exact = exact_qp(&z, &pts);
            assert!(d + 1e-12 >= exact);
            if (d - exact).abs() <= 1e-10 * (1.0 + exact) {
                agree += 1;
            }
        }
        eprintln!("greedy projection matched the exact QP on {agree}/100 instances");
    }
}
