//! Karhunen-Loeve reduced-order model of a curve ensemble.
//!
//! Eigenfunctions are orthonormal under the trapezoid inner product on the
//! grid, which makes the coefficient map an L2 isometry.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::container;
use crate::dataset::SyntheticDataset;
use crate::error::{Error, Result};
use crate::forward::TimeGrid;
use crate::quadrature::{interp_uniform, trapezoid_weights};

const MAGIC: &[u8; 8] = b"RIVSTKL\0";

/// Default number of retained modes.
pub const DEFAULT_MODES: usize = 20;

/// Relative eigenvalue threshold defining numerical rank.
const RANK_TOL: f64 = 1e-12;

/// KL coefficients `Z` of one curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KlCoefficients(pub Vec<f64>);

impl std::ops::Deref for KlCoefficients {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlModel {
    pub grid: TimeGrid,
    pub mean: Vec<f64>,
    /// Retained eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Retained eigenfunctions, one row per mode.
    pub modes: Vec<Vec<f64>>,
    /// Sum of all eigenvalues (the weighted covariance trace).
    pub total_variance: f64,
    pub dataset_hash: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    grid: TimeGrid,
    n_modes: usize,
    eigenvalues: Vec<f64>,
    total_variance: f64,
    dataset_hash: Option<String>,
}

/// Fits the model to a synthetic dataset and records its content hash.
pub fn fit_kl(dataset: &SyntheticDataset, n_modes: usize) -> Result<KlModel> {
    let mut model = fit_kl_curves(dataset.grid, &dataset.curves, n_modes)?;
    model.dataset_hash = Some(dataset.hash()?);
    Ok(model)
}

/// Fits the model to row-major curves on `grid`.
pub fn fit_kl_curves(grid: TimeGrid, curves: &[f64], n_modes: usize) -> Result<KlModel> {
    let g = grid.count;
    if !curves.len().is_multiple_of(g) {
        return Err(Error::LengthMismatch { expected: g, got: curves.len() % g });
    }
    let n = curves.len() / g;
    if n < n_modes + 1 || n < 2 {
        return Err(Error::NotEnoughSamples { needed: (n_modes + 1).max(2), have: n });
    }
    let mut mean = vec![0.0; g];
    for row in curves.chunks_exact(g) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let w = trapezoid_weights(g, grid.step);
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let scale = 1.0 / ((n - 1) as f64).sqrt();
    // Y = X W^{1/2} / sqrt(n - 1); the weighted covariance is Y^T Y
    let y = DMatrix::from_fn(n, g, |i, k| (curves[i * g + k] - mean[k]) * sqrt_w[k] * scale);

    let (mut values, mut vectors) = if n < g {
        // snapshot method on the n x n Gram matrix
        let gram = &y * y.transpose();
        let eig = SymmetricEigen::new(gram);
        let order = descending(eig.eigenvalues.as_slice());
        let lambda: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let vecs: Vec<Vec<f64>> = order
            .iter()
            .map(|&j| {
                let u = eig.eigenvectors.column(j);
                let l = eig.eigenvalues[j].max(f64::MIN_POSITIVE).sqrt();
                let v = y.transpose() * u / l;
                v.iter().copied().collect()
            })
            .collect();
        (lambda, vecs)
    } else {
        let cov = y.transpose() * &y;
        let eig = SymmetricEigen::new(cov);
        let order = descending(eig.eigenvalues.as_slice());
        let lambda: Vec<f64> = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let vecs = order.iter().map(|&j| eig.eigenvectors.column(j).iter().copied().collect()).collect();
        (lambda, vecs)
    };
    let total_variance: f64 = values.iter().sum();
    let lmax = values.first().copied().unwrap_or(0.0).max(0.0);
    let rank = values.iter().take_while(|&&l| l > RANK_TOL * lmax && l > 0.0).count();
    if n_modes > rank {
        return Err(Error::RankDeficient { requested: n_modes, rank });
    }
    values.truncate(n_modes);
    vectors.truncate(n_modes);

    // back to eigenfunctions: phi = W^{-1/2} v, then re-orthonormalize
    let mut modes: Vec<Vec<f64>> = vectors
        .into_iter()
        .map(|v| v.iter().zip(&sqrt_w).map(|(a, s)| if *s > 0.0 { a / s } else { 0.0 }).collect())
        .collect();
    for _ in 0..2 {
        for j in 0..modes.len() {
            for i in 0..j {
                let c = weighted_dot(&modes[j], &modes[i], &w);
                let (head, tail) = modes.split_at_mut(j);
                tail[0].iter_mut().zip(&head[i]).for_each(|(a, b)| *a -= c * b);
            }
            let norm = weighted_dot(&modes[j], &modes[j], &w).sqrt();
            modes[j].iter_mut().for_each(|a| *a /= norm);
        }
    }
    for m in modes.iter_mut() {
        let big = m.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if big < 0.0 {
            m.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(KlModel { grid, mean, eigenvalues: values, modes, total_variance, dataset_hash: None })
}

fn descending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx
}

fn weighted_dot(a: &[f64], b: &[f64], w: &[f64]) -> f64 {
    a.iter().zip(b).zip(w).map(|((x, y), w)| x * y * w).sum()
}

impl KlModel {
    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        trapezoid_weights(self.grid.count, self.grid.step)
    }

    /// `Z_j = <c - mean, phi_j>` under the trapezoid inner product.
    pub fn project(&self, curve: &[f64]) -> Result<KlCoefficients> {
        if curve.len() != self.grid.count {
            return Err(Error::LengthMismatch { expected: self.grid.count, got: curve.len() });
        }
        let w = self.weights();
        let centered: Vec<f64> = curve.iter().zip(&self.mean).zip(&w).map(|((c, m), w)| (c - m) * w).collect();
        Ok(KlCoefficients(
            self.modes.iter().map(|phi| phi.iter().zip(&centered).map(|(a, b)| a * b).sum()).collect(),
        ))
    }

    /// `mean + sum_j Z_j phi_j`.
    pub fn reconstruct(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.n_modes() {
            return Err(Error::LengthMismatch { expected: self.n_modes(), got: z.len() });
        }
        let mut out = self.mean.clone();
        for (zj, phi) in z.iter().zip(&self.modes) {
            out.iter_mut().zip(phi).for_each(|(o, p)| *o += zj * p);
        }
        Ok(out)
    }

    /// Coefficients of every row of a row-major curve matrix.
    pub fn project_all(&self, curves: &[f64]) -> Result<Vec<KlCoefficients>> {
        curves.chunks(self.grid.count).map(|c| self.project(c)).collect()
    }

    /// Mean curve at dimensionless time `t`, zero beyond the grid.
    pub fn mean_at(&self, t: f64) -> f64 {
        interp_uniform(&self.mean, self.grid.step, t)
    }

    /// Eigenfunction `j` at dimensionless time `t`, zero beyond the grid.
    pub fn mode_at(&self, j: usize, t: f64) -> f64 {
        interp_uniform(&self.modes[j], self.grid.step, t)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            grid: self.grid,
            n_modes: self.n_modes(),
            eigenvalues: self.eigenvalues.clone(),
            total_variance: self.total_variance,
            dataset_hash: self.dataset_hash.clone(),
        };
        let mut blocks: Vec<&[f64]> = vec![&self.mean];
        blocks.extend(self.modes.iter().map(|m| m.as_slice()));
        container::encode(MAGIC, &header, &blocks)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (h, values): (Header, Vec<f64>) = container::decode(MAGIC, bytes)?;
        let g = h.grid.count;
        let expected = g * (h.n_modes + 1);
        if values.len() != expected || h.eigenvalues.len() != h.n_modes {
            return Err(Error::LengthMismatch { expected, got: values.len() });
        }
        let mut chunks = values.chunks_exact(g).map(|c| c.to_vec());
        let mean = chunks.next().unwrap();
        Ok(KlModel {
            grid: h.grid,
            mean,
            eigenvalues: h.eigenvalues,
            modes: chunks.collect(),
            total_variance: h.total_variance,
            dataset_hash: h.dataset_hash,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ensemble(n: usize, grid: TimeGrid, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for _ in 0..n {
            let (a, mu, s) = (rng.random_range(0.5..1.5), rng.random_range(2.0..4.0), rng.random_range(0.3..0.8));
            out.extend(grid.times().iter().map(|t| a * (-(t - mu) * (t - mu) / (2.0 * s * s)).exp()));
        }
        out
    }

    #[test]
    fn orthonormal_and_isometric() {
        let grid = TimeGrid::new(0.05, 161).unwrap();
        let curves = ensemble(60, grid, 1);
        let m = fit_kl_curves(grid, &curves, 8).unwrap();
        let w = m.weights();
        for i in 0..8 {
            for j in 0..8 {
                let g = weighted_dot(&m.modes[i], &m.modes[j], &w);
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
        assert!(m.eigenvalues.windows(2).all(|p| p[0] > p[1]));
        let z1 = [0.3, -0.1, 0.2, 0.0, 0.05, 0.0, -0.4, 0.1];
        let z2 = [0.1; 8];
        let a = m.reconstruct(&z1).unwrap();
        let b = m.reconstruct(&z2).unwrap();
        let l2: f64 = a.iter().zip(&b).zip(&w).map(|((x, y), w)| (x - y) * (x - y) * w).sum::<f64>().sqrt();
        let ez: f64 = z1.iter().zip(&z2).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        assert!((l2 - ez).abs() < 1e-9);
        let back = m.project(&a).unwrap();
        assert!(back.iter().zip(&z1).all(|(x, y)| (x - y).abs() < 1e-10));
    }

    #[test]
    fn snapshot_matches_direct() {
        let grid = TimeGrid::new(0.2, 41).unwrap();
        let small = ensemble(30, grid, 2);
        let large = [small.clone(), small.clone()].concat();
        let a = fit_kl_curves(grid, &small, 5).unwrap();
        let b = fit_kl_curves(grid, &large, 5).unwrap();
        // duplicated ensemble: same mean, covariance scaled by 2(n-1)/(2n-1)
        let f = 58.0 / 59.0;
        for j in 0..5 {
            assert!((a.eigenvalues[j] * f - b.eigenvalues[j]).abs() < 1e-10 * a.eigenvalues[0]);
            assert!(a.modes[j].iter().zip(&b.modes[j]).all(|(x, y)| (x - y).abs() < 1e-6));
        }
        assert!((a.total_variance * f - b.total_variance).abs() < 1e-10 * a.total_variance);
    }

    #[test]
    fn rank_limits() {
        let grid = TimeGrid::new(0.1, 50).unwrap();
        let two = ensemble(2, grid, 3);
        let m = fit_kl_curves(grid, &two, 1).unwrap();
        assert_eq!(m.n_modes(), 1);
        let c = &two[..50];
        let same = [c, c, c, c].concat();
        assert!(matches!(fit_kl_curves(grid, &same, 1), Err(Error::RankDeficient { rank: 0, .. })));
        let three = [&two[..], c].concat();
        assert!(matches!(fit_kl_curves(grid, &three, 2), Err(Error::RankDeficient { rank: 1, .. })));
    }

    #[test]
    fn file_round_trip() {
        let grid = TimeGrid::new(0.1, 50).unwrap();
        let m = fit_kl_curves(grid, &ensemble(10, grid, 5), 3).unwrap();
        assert_eq!(KlModel::from_bytes(&m.to_bytes().unwrap()).unwrap(), m);
    }
}
