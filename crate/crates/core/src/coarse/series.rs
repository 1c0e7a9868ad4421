//! Truncated power series in `s`, used as moment-generating functions.

use std::ops::{Add, Mul};

/// Coefficients `c_0..c_K` of `sum c_k s^k`, truncated at order `K = N - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Series<const N: usize>(pub [f64; N]);

impl<const N: usize> Series<N> {
    pub fn constant(c: f64) -> Self {
        let mut a = [0.0; N];
        a[0] = c;
        Series(a)
    }

    /// `c0 + c1 s`.
    pub fn linear(c0: f64, c1: f64) -> Self {
        let mut a = [0.0; N];
        a[0] = c0;
        if N > 1 {
            a[1] = c1;
        }
        Series(a)
    }

    pub fn scale(self, k: f64) -> Self {
        Series(self.0.map(|c| c * k))
    }

    /// Multiplication by `s`.
    pub fn shift(self) -> Self {
        let mut a = [0.0; N];
        a[1..].copy_from_slice(&self.0[..N - 1]);
        Series(a)
    }

    pub fn recip(self) -> Self {
        let a = self.0;
        let mut b = [0.0; N];
        b[0] = 1.0 / a[0];
        for n in 1..N {
            let s: f64 = (1..=n).map(|k| a[k] * b[n - k]).sum();
            b[n] = -s / a[0];
        }
        Series(b)
    }

    /// Principal square root; requires `c_0 > 0`.
    pub fn sqrt(self) -> Self {
        let a = self.0;
        let mut b = [0.0; N];
        b[0] = a[0].sqrt();
        for n in 1..N {
            let s: f64 = (1..n).map(|k| b[k] * b[n - k]).sum();
            b[n] = (a[n] - s) / (2.0 * b[0]);
        }
        Series(b)
    }

    pub fn exp(self) -> Self {
        let a = self.0;
        let mut b = [0.0; N];
        b[0] = a[0].exp();
        // b' = a' b
        for n in 1..N {
            let s: f64 = (1..=n).map(|k| k as f64 * a[k] * b[n - k]).sum();
            b[n] = s / n as f64;
        }
        Series(b)
    }
}

impl<const N: usize> Add for Series<N> {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        let mut a = self.0;
        a.iter_mut().zip(rhs.0).for_each(|(x, y)| *x += y);
        Series(a)
    }
}

impl<const N: usize> Mul for Series<N> {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        let mut c = [0.0; N];
        for i in 0..N {
            for j in 0..N - i {
                c[i + j] += self.0[i] * rhs.0[j];
            }
        }
        Series(c)
    }
}
