//! Adaptive Lipschitz global search with a coordinate-wise local polish.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growth factor of the Lipschitz grid `k_i = (1 + delta)^i`.
const GROWTH: f64 = 0.1;
/// Probability of evaluating a uniform draw without the bound test.
const EXPLORE: f64 = 0.1;
/// Candidate draws per step before falling back to a polish.
const MAX_DRAWS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub budget: usize,
    pub seed: u64,
    /// A polish runs after every `polish_every` accepted global steps.
    pub polish_every: usize,
}

impl SearchBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, budget: usize, seed: u64) -> Result<Self> {
        let b = SearchBox { lower, upper, budget, seed, polish_every: 4 };
        b.validate()?;
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::LengthMismatch { expected: self.lower.len(), got: self.upper.len() });
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidParameter("box needs finite lower < upper".into()));
        }
        if self.budget < self.dim() + 2 {
            return Err(Error::InvalidParameter(format!("budget must be at least {}", self.dim() + 2)));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.lower).zip(&self.upper).all(|((x, l), u)| *l <= *x && *x <= *u)
    }

    fn uniform(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| rng.random_range(*l..*u)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub x: Vec<f64>,
    pub value: f64,
    /// Best value seen so far, including this one.
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipoResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub trace: Vec<Evaluation>,
    pub lipschitz: f64,
}

struct State<'a, F> {
    loss: F,
    bx: &'a SearchBox,
    xs: Vec<Vec<f64>>,
    fs: Vec<f64>,
    trace: Vec<Evaluation>,
    best: usize,
    slope: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl<F: FnMut(&[f64]) -> Result<f64>> State<'_, F> {
    fn exhausted(&self) -> bool {
        self.xs.len() >= self.bx.budget
    }

    fn eval(&mut self, x: Vec<f64>) -> Result<f64> {
        let f = (self.loss)(&x)?;
        if !f.is_finite() {
            return Err(Error::NonFiniteLoss(x));
        }
        for (xi, fi) in self.xs.iter().zip(&self.fs) {
            let d = dist(xi, &x);
            if d > 0.0 {
                self.slope = self.slope.max((fi - f).abs() / d);
            }
        }
        if self.xs.is_empty() || f < self.fs[self.best] {
            self.best = self.xs.len();
        }
        self.xs.push(x.clone());
        self.fs.push(f);
        self.trace.push(Evaluation { x, value: f, incumbent: self.fs[self.best] });
        Ok(f)
    }

    /// Smallest grid value `(1 + delta)^i` not below the observed slope.
    fn lipschitz(&self) -> f64 {
        if self.slope <= 0.0 {
            return 0.0;
        }
        let i = (self.slope.ln() / (1.0 + GROWTH).ln()).ceil();
        let mut k = (1.0 + GROWTH).powf(i);
        if k < self.slope {
            k *= 1.0 + GROWTH;
        }
        k
    }

    /// Lipschitz lower bound `max_i (f_i - k |x - x_i|)` is below the incumbent.
    fn promising(&self, x: &[f64], k: f64) -> bool {
        let target = self.fs[self.best];
        !self.xs.iter().zip(&self.fs).any(|(xi, fi)| fi - k * dist(xi, x) >= target)
    }

    /// One coordinate sweep of three-point parabolic steps around the incumbent.
    fn polish(&mut self, radius: &mut [f64]) -> Result<()> {
        let bx = self.bx;
        let before = self.fs[self.best];
        for j in 0..bx.dim() {
            if self.exhausted() {
                break;
            }
            let x0 = self.xs[self.best].clone();
            let f0 = self.fs[self.best];
            let h = radius[j];
            let probe = |s: f64, st: &mut Self| -> Result<Option<(f64, f64)>> {
                let xj = (x0[j] + s).clamp(bx.lower[j], bx.upper[j]);
                if xj == x0[j] || st.exhausted() {
                    return Ok(None);
                }
                let mut x = x0.clone();
                x[j] = xj;
                Ok(Some((xj - x0[j], st.eval(x)?)))
            };
            let minus = probe(-h, self)?;
            let plus = probe(h, self)?;
            if let (Some((sm, fm)), Some((sp, fp))) = (minus, plus) {
                // parabola through (sm, fm), (0, f0), (sp, fp)
                let a = ((fp - f0) / sp - (fm - f0) / sm) / (sp - sm);
                let b = (fp - f0) / sp - a * sp;
                if a > 0.0 {
                    let step = (-b / (2.0 * a)).clamp(-2.0 * h, 2.0 * h);
                    if step.abs() > 1e-15 * (1.0 + x0[j].abs()) {
                        probe(step, self)?;
                    }
                }
            }
            let moved = (self.xs[self.best][j] - x0[j]).abs();
            radius[j] = if self.fs[self.best] < f0 { moved.max(0.25 * h) } else { 0.5 * h };
            radius[j] = radius[j].clamp(1e-12 * (bx.upper[j] - bx.lower[j]), 0.25 * (bx.upper[j] - bx.lower[j]));
        }
        if self.fs[self.best] >= before {
            radius.iter_mut().for_each(|r| *r *= 0.5);
        }
        Ok(())
    }
}

/// Minimizes `loss` over the box within `budget` evaluations.
pub fn lipo_minimize<F>(loss: F, bx: &SearchBox) -> Result<LipoResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    bx.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(bx.seed);
    let mut st = State { loss, bx, xs: Vec::new(), fs: Vec::new(), trace: Vec::new(), best: 0, slope: 0.0 };
    for _ in 0..bx.dim() + 2 {
        let x = bx.uniform(&mut rng);
        st.eval(x)?;
    }
    let mut radius: Vec<f64> = bx.lower.iter().zip(&bx.upper).map(|(l, u)| 0.1 * (u - l)).collect();
    let mut accepted = 0;
    while !st.exhausted() {
        let k = st.lipschitz();
        let mut candidate = None;
        for _ in 0..MAX_DRAWS {
            let x = bx.uniform(&mut rng);
            if rng.random::<f64>() < EXPLORE || st.promising(&x, k) {
                candidate = Some(x);
                break;
            }
        }
        match candidate {
            Some(x) => {
                st.eval(x)?;
                accepted += 1;
                if accepted % bx.polish_every.max(1) == 0 {
                    st.polish(&mut radius)?;
                }
            }
            None => st.polish(&mut radius)?,
        }
    }
    let k = st.lipschitz();
    Ok(LipoResult { x: st.xs[st.best].clone(), value: st.fs[st.best], trace: st.trace, lipschitz: k })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(d: usize, half: f64, budget: usize, seed: u64) -> SearchBox {
        SearchBox::new(vec![-half; d], vec![half; d], budget, seed).unwrap()
    }

    #[test]
    fn convex_quadratic() {
        let c = [1.3, -0.7, 2.1];
        let f = |x: &[f64]| Ok((0..3).map(|i| (i + 1) as f64 * (x[i] - c[i]).powi(2)).sum::<f64>() + 0.3 * (x[0] - c[0]) * (x[1] - c[1]));
        let r = lipo_minimize(f, &cube(3, 5.0, 200, 1)).unwrap();
        assert!(dist(&r.x, &c) < 1e-4, "{:?} {}", r.x, r.value);
    }

    #[test]
    fn rastrigin_global_minimum() {
        let f = |x: &[f64]| Ok(30.0 + x.iter().map(|v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos()).sum::<f64>());
        let hits = (0..10)
            .filter(|&seed| {
                let r = lipo_minimize(f, &cube(3, 5.0, 1000, seed)).unwrap();
                r.x.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-2
            })
            .count();
        assert!(hits >= 8, "{hits}/10");
    }

    #[test]
    fn incumbent_monotone_and_inside() {
        let f = |x: &[f64]| Ok(x.iter().map(|v| v.sin() * 3.0 + v * v * 0.1).sum());
        let bx = cube(2, 4.0, 150, 9);
        let r = lipo_minimize(f, &bx).unwrap();
        assert_eq!(r.trace.len(), 150);
        assert!(r.trace.windows(2).all(|w| w[1].incumbent <= w[0].incumbent));
        assert!(r.trace.iter().all(|e| bx.contains(&e.x)));
        let again = lipo_minimize(f, &bx).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn minimal_budget_is_random_search() {
        let f = |x: &[f64]| Ok(x[0] * x[0] + x[1] * x[1]);
        let r = lipo_minimize(f, &cube(2, 1.0, 4, 3)).unwrap();
        assert_eq!(r.trace.len(), 4);
        let best = r.trace.iter().map(|e| e.value).fold(f64::INFINITY, f64::min);
        assert_eq!(r.value, best);
        assert!(SearchBox::new(vec![0.0; 2], vec![1.0; 2], 3, 0).is_err());
    }

    #[test]
    fn non_finite_loss_names_point() {
        let f = |x: &[f64]| Ok(if x[0] > 0.0 { f64::NAN } else { 1.0 });
        match lipo_minimize(f, &cube(1, 1.0, 50, 0)) {
            Err(Error::NonFiniteLoss(x)) => assert!(x[0] > 0.0),
            other => panic!("{other:?}"),
        }
    }
}
