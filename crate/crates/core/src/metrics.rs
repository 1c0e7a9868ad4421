//! Error metrics between a measured curve and model values at its sample times.

use serde::{Deserialize, Serialize};

use crate::curve::{MeasuredCurve, WINDOW_PEAKS};
use crate::error::{Error, Result};

/// Model weights are floored here before taking logs.
pub const KLD_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Dimensionless fraction.
    pub rmse: f64,
    /// Nats.
    pub kld: f64,
    pub window_end: f64,
    pub samples: usize,
}

/// Δ-weighted, sum-normalized distributions of data and model inside the window.
fn distributions(curve: &MeasuredCurve, model: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if model.len() != curve.len() {
        return Err(Error::LengthMismatch { expected: curve.len(), got: model.len() });
    }
    let end = WINDOW_PEAKS * curve.peak_time();
    let deltas = curve.deltas();
    let keep: Vec<usize> = (0..curve.len()).filter(|&i| curve.times[i] <= end).collect();
    let p: Vec<f64> = keep.iter().map(|&i| curve.concentrations[i] * deltas[i]).collect();
    let q: Vec<f64> = keep.iter().map(|&i| model[i] * deltas[i]).collect();
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if !(sp > 0.0) {
        return Err(Error::InvalidCurve("measured mass is zero".into()));
    }
    if !(sq > 0.0) || !sq.is_finite() {
        return Err(Error::InvalidCurve("model mass is zero".into()));
    }
    Ok((p.iter().map(|x| x / sp).collect(), q.iter().map(|x| x / sq).collect()))
}

pub fn rmse(curve: &MeasuredCurve, model: &[f64]) -> Result<f64> {
    let (p, q) = distributions(curve, model)?;
    Ok(rmse_of(&p, &q))
}

pub fn kld(curve: &MeasuredCurve, model: &[f64]) -> Result<f64> {
    let (p, q) = distributions(curve, model)?;
    Ok(kld_of(&p, &q))
}

/// RMS difference of two distributions of equal length.
pub fn rmse_of(p: &[f64], q: &[f64]) -> f64 {
    let ss: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    (ss / p.len() as f64).sqrt()
}

/// `sum p (ln p - ln q)` over `p > 0`.
pub fn kld_of(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(a, _)| **a > 0.0)
        .map(|(a, b)| a * (a.ln() - b.max(KLD_FLOOR).ln()))
        .sum()
}

pub fn report(curve: &MeasuredCurve, model: &[f64]) -> Result<MetricReport> {
    let (p, q) = distributions(curve, model)?;
    Ok(MetricReport {
        rmse: rmse_of(&p, &q),
        kld: kld_of(&p, &q),
        window_end: WINDOW_PEAKS * curve.peak_time(),
        samples: p.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn curve(c: Vec<f64>) -> MeasuredCurve {
        let times = (1..=c.len()).map(|i| i as f64).collect();
        MeasuredCurve::new(times, c, 10.0).unwrap()
    }

    #[test]
    fn identical_and_scaled() {
        let c = curve(vec![0.1, 1.0, 0.6, 0.2]);
        assert_eq!(rmse(&c, &c.concentrations).unwrap(), 0.0);
        assert_eq!(kld(&c, &c.concentrations).unwrap(), 0.0);
        let m = vec![0.2, 0.9, 0.7, 0.1];
        let m5: Vec<f64> = m.iter().map(|x| 5.0 * x).collect();
        assert!((rmse(&c, &m).unwrap() - rmse(&c, &m5).unwrap()).abs() < 1e-15);
        assert!((kld(&c.scaled(3.0), &m).unwrap() - kld(&c, &m5).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn hand_computed_rmse() {
        // deltas (0.5, 1, 1, 0.5)
        let c = curve(vec![2.0, 1.0, 1.0, 0.0]);
        let m = vec![0.0, 1.0, 1.0, 2.0];
        // p = (1, 1, 1, 0)/3, q = (0, 1, 1, 1)/3
        let expected = ((1.0 / 9.0 + 1.0 / 9.0) / 4.0f64).sqrt();
        assert!((rmse(&c, &m).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn textbook_kld() {
        assert!((kld_of(&[1.0, 0.0], &[0.5, 0.5]) - std::f64::consts::LN_2).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mut p: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let mut q: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
            p.iter_mut().for_each(|x| *x /= sp);
            q.iter_mut().for_each(|x| *x /= sq);
            assert!(kld_of(&p, &q) >= -1e-15);
            assert!((rmse_of(&p, &q) - rmse_of(&q, &p)).abs() < 1e-16);
        }
    }

    #[test]
    fn window_excludes_late_samples() {
        // peak at t = 1, window ends at 24
        let mut c = vec![1.0, 0.5];
        c.extend(std::iter::repeat_n(0.0, 28));
        let c = curve(c);
        let mut m = c.concentrations.clone();
        m[29] = 100.0;
        let r = report(&c, &m).unwrap();
        assert_eq!(r.samples, 24);
        assert!(r.rmse < 1e-15);
    }

    #[test]
    fn zero_model_mass() {
        let c = curve(vec![0.1, 1.0, 0.6]);
        assert!(rmse(&c, &[0.0; 3]).is_err());
        assert!(rmse(&c, &[0.0; 2]).is_err());
    }
}
