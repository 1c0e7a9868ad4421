//! Dimensionless parameter vectors and the lognormal prior they are drawn
//! from.

use nalgebra::{Cholesky, Matrix3, SymmetricEigen, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Family, MemoryKernel};
use crate::laplace::TransportParams;

/// Parameter vector `y`:
/// first order `(Pe, beta k_f, k_r)`, power law `(Pe, beta alpha, 1 - gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NamedParams", into = "NamedParams")]
pub struct DimensionlessParams {
    pub family: Family,
    pub values: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
enum NamedParams {
    FirstOrder { pe: f64, beta_k_f: f64, k_r: f64 },
    PowerLaw { pe: f64, beta_alpha: f64, one_minus_gamma: f64 },
}

impl TryFrom<NamedParams> for DimensionlessParams {
    type Error = Error;

    fn try_from(p: NamedParams) -> Result<Self> {
        match p {
            NamedParams::FirstOrder { pe, beta_k_f, k_r } => Self::new(Family::FirstOrder, [pe, beta_k_f, k_r]),
            NamedParams::PowerLaw { pe, beta_alpha, one_minus_gamma } => {
                Self::new(Family::PowerLaw, [pe, beta_alpha, one_minus_gamma])
            }
        }
    }
}

impl From<DimensionlessParams> for NamedParams {
    fn from(p: DimensionlessParams) -> Self {
        let [a, b, c] = p.values;
        match p.family {
            Family::FirstOrder => NamedParams::FirstOrder { pe: a, beta_k_f: b, k_r: c },
            Family::PowerLaw => NamedParams::PowerLaw { pe: a, beta_alpha: b, one_minus_gamma: c },
        }
    }
}

impl DimensionlessParams {
    pub fn new(family: Family, values: [f64; 3]) -> Result<Self> {
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!("parameters must be positive, got {values:?}")));
        }
        if family == Family::PowerLaw && values[2] >= 1.0 {
            return Err(Error::InvalidParameter(format!("1 - gamma must be below 1, got {}", values[2])));
        }
        Ok(DimensionlessParams { family, values })
    }

    pub fn first_order(pe: f64, beta_k_f: f64, k_r: f64) -> Result<Self> {
        Self::new(Family::FirstOrder, [pe, beta_k_f, k_r])
    }

    pub fn power_law(pe: f64, beta_alpha: f64, one_minus_gamma: f64) -> Result<Self> {
        Self::new(Family::PowerLaw, [pe, beta_alpha, one_minus_gamma])
    }

    pub fn from_log(family: Family, logs: [f64; 3]) -> Result<Self> {
        Self::new(family, logs.map(f64::exp))
    }

    pub fn peclet(&self) -> f64 {
        self.values[0]
    }

    pub fn log(&self) -> [f64; 3] {
        self.values.map(f64::ln)
    }

    pub fn names(family: Family) -> [&'static str; 3] {
        match family {
            Family::FirstOrder => ["pe", "beta_k_f", "k_r"],
            Family::PowerLaw => ["pe", "beta_alpha", "one_minus_gamma"],
        }
    }

    /// Forward-solver parameters with `beta = 1` and the product carried by
    /// the kernel.
    pub fn transport(&self) -> Result<TransportParams> {
        let [pe, prod, third] = self.values;
        let kernel = match self.family {
            Family::FirstOrder => MemoryKernel::first_order(prod, third)?,
            Family::PowerLaw => MemoryKernel::power_law(prod, 1.0 - third)?,
        };
        TransportParams::new(pe, 1.0, kernel, 1.0)
    }
}

/// Multivariate lognormal prior over `y`; draws use covariance `b * sigma_log`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior {
    pub mu_log: [f64; 3],
    pub sigma_log: [[f64; 3]; 3],
    pub b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Family>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inliers: Vec<usize>,
}

impl LogNormalPrior {
    pub fn new(mu_log: [f64; 3], sigma_log: [[f64; 3]; 3], b: f64) -> Result<Self> {
        let p = LogNormalPrior { mu_log, sigma_log, b, family: None, inliers: Vec::new() };
        p.validate()?;
        Ok(p)
    }

    /// Built-in prior for runs without coarse estimates, centered on
    /// moderately dispersive reaches with visible exchange tails.
    pub fn reference(family: Family) -> Self {
        let (mu, sd) = match family {
            Family::FirstOrder => ([700f64.ln(), 0.4f64.ln(), 2.5f64.ln()], [0.45, 0.35, 0.35]),
            Family::PowerLaw => ([700f64.ln(), 0.5f64.ln(), 0.4f64.ln()], [0.45, 0.35, 0.25]),
        };
        let sigma = [0, 1, 2].map(|i| [0, 1, 2].map(|j| if i == j { sd[i] * sd[i] } else { 0.0 }));
        LogNormalPrior { mu_log: mu, sigma_log: sigma, b: 2.0, family: Some(family), inliers: Vec::new() }
    }

    pub fn with_family(mut self, family: Family) -> Self {
        self.family = Some(family);
        self
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.sigma_log[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::InvalidParameter(format!("inflation b must be > 0, got {}", self.b)));
        }
        let s = self.covariance();
        if (s - s.transpose()).abs().max() > 1e-12 * s.abs().max() {
            return Err(Error::InvalidParameter("prior covariance is not symmetric".into()));
        }
        check_positive_definite(&s)
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self> {
        let p: LogNormalPrior = serde_json::from_slice(&std::fs::read(path)?)?;
        p.validate()?;
        Ok(p)
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

fn check_positive_definite(s: &Matrix3<f64>) -> Result<()> {
    let eig = SymmetricEigen::new(*s).eigenvalues;
    let max = eig.max();
    if !(max > 0.0) || eig.min() <= 1e-12 * max {
        return Err(Error::SingularCovariance);
    }
    Ok(())
}

const MAHALANOBIS_LIMIT: f64 = 4.0;

/// Mean/covariance of `ln y` with iterative Mahalanobis outlier rejection.
pub fn fit_prior(estimates: &[DimensionlessParams], b: f64) -> Result<LogNormalPrior> {
    let d = 3;
    if estimates.len() < d + 2 {
        return Err(Error::NotEnoughSamples { needed: d + 2, have: estimates.len() });
    }
    let family = estimates[0].family;
    if let Some(other) = estimates.iter().find(|e| e.family != family) {
        return Err(Error::FamilyMismatch { expected: family.to_string(), got: other.family.to_string() });
    }
    let logs: Vec<Vector3<f64>> = estimates.iter().map(|e| Vector3::from(e.log())).collect();
    let mut inliers: Vec<usize> = (0..logs.len()).collect();
    loop {
        if inliers.len() < d + 2 {
            return Err(Error::NotEnoughSamples { needed: d + 2, have: inliers.len() });
        }
        let (mu, sigma) = mean_cov(&logs, &inliers);
        check_positive_definite(&sigma)?;
        let chol = Cholesky::new(sigma).ok_or(Error::SingularCovariance)?;
        let kept: Vec<usize> = inliers
            .iter()
            .copied()
            .filter(|&i| {
                let r = logs[i] - mu;
                r.dot(&chol.solve(&r)).sqrt() <= MAHALANOBIS_LIMIT
            })
            .collect();
        if kept.len() == inliers.len() {
            let mut prior = LogNormalPrior::new(
                mu.into(),
                [0, 1, 2].map(|i| [0, 1, 2].map(|j| sigma[(i, j)])),
                b,
            )?
            .with_family(family);
            prior.inliers = inliers;
            return Ok(prior);
        }
        log::debug!("prior fit dropped {} outliers", inliers.len() - kept.len());
        inliers = kept;
    }
}

fn mean_cov(x: &[Vector3<f64>], idx: &[usize]) -> (Vector3<f64>, Matrix3<f64>) {
    let n = idx.len() as f64;
    let mu = idx.iter().fold(Vector3::zeros(), |acc, &i| acc + x[i]) / n;
    let cov = idx.iter().fold(Matrix3::zeros(), |acc, &i| {
        let r = x[i] - mu;
        acc + r * r.transpose()
    }) / (n - 1.0);
    (mu, cov)
}

const MAX_REJECTIONS: usize = 1000;

/// Draws `n` parameter vectors with a seeded ChaCha stream. Power-law draws
/// with `1 - gamma >= 1` are redrawn.
pub fn sample_prior(prior: &LogNormalPrior, family: Family, n: usize, seed: u64) -> Result<Vec<DimensionlessParams>> {
    prior.validate()?;
    if let Some(f) = prior.family {
        if f != family {
            return Err(Error::FamilyMismatch { expected: f.to_string(), got: family.to_string() });
        }
    }
    let l = Cholesky::new(prior.covariance() * prior.b).ok_or(Error::SingularCovariance)?.l();
    let mu = Vector3::from(prior.mu_log);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut tries = 0;
        loop {
            let z = Vector3::from_fn(|_, _| StandardNormal.sample(&mut rng));
            let y = (mu + l * z).map(f64::exp);
            if family == Family::PowerLaw && y[2] >= 1.0 {
                tries += 1;
                if tries >= MAX_REJECTIONS {
                    return Err(Error::RejectionLimit(MAX_REJECTIONS));
                }
                continue;
            }
            out.push(DimensionlessParams::new(family, [y[0], y[1], y[2]])?);
            break;
        }
    }
    Ok(out)
}
