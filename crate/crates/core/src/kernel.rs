//! Memory functions describing residence times in the immobile zone.
//!
//! Everything here is dimensionless: rates are scaled by the advective time
//! `L / v`. Only the first-order exchange and pure power-law families are
//! supported.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma as gamma_fn;

use crate::error::{Error, Result};

/// Memory-function family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    FirstOrder,
    PowerLaw,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::FirstOrder => "first_order",
            Family::PowerLaw => "power_law",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "first_order" | "first-order" => Ok(Family::FirstOrder),
            "power_law" | "power-law" => Ok(Family::PowerLaw),
            other => Err(Error::InvalidParameter(format!("unknown family `{other}`"))),
        }
    }
}

/// Dimensionless memory function `g(t)` and its Laplace transform `G(s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum MemoryKernel {
    /// `g(t) = k_f exp(-k_r t)`.
    FirstOrder { k_f: f64, k_r: f64 },
    /// `g(t) = alpha t^-gamma / Gamma(1 - gamma)`, `0 < gamma <= 1`.
    PowerLaw { alpha: f64, gamma: f64 },
}

impl MemoryKernel {
    /// First-order exchange. `k_r = 0` is accepted as the no-return limit.
    pub fn first_order(k_f: f64, k_r: f64) -> Result<Self> {
        if !(k_f > 0.0 && k_f.is_finite()) || !(k_r >= 0.0 && k_r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "first-order kernel needs k_f > 0 and k_r >= 0, got k_f = {k_f}, k_r = {k_r}"
            )));
        }
        Ok(MemoryKernel::FirstOrder { k_f, k_r })
    }

    pub fn power_law(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power-law kernel needs alpha > 0 and 0 < gamma <= 1, got alpha = {alpha}, gamma = {gamma}"
            )));
        }
        Ok(MemoryKernel::PowerLaw { alpha, gamma })
    }

    pub fn family(&self) -> Family {
        match self {
            MemoryKernel::FirstOrder { .. } => Family::FirstOrder,
            MemoryKernel::PowerLaw { .. } => Family::PowerLaw,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MemoryKernel::FirstOrder { k_f, k_r } => Self::first_order(k_f, k_r).map(|_| ()),
            MemoryKernel::PowerLaw { alpha, gamma } => Self::power_law(alpha, gamma).map(|_| ()),
        }
    }

    /// `G(s)` on the principal branch.
    pub fn laplace(&self, s: Complex64) -> Result<Complex64> {
        match *self {
            MemoryKernel::FirstOrder { k_f, k_r } => {
                let den = s + k_r;
                if den == Complex64::new(0.0, 0.0) {
                    return Err(Error::KernelPole(s));
                }
                Ok(Complex64::new(k_f, 0.0) / den)
            }
            MemoryKernel::PowerLaw { alpha, gamma } => {
                if gamma == 1.0 {
                    return Ok(Complex64::new(alpha, 0.0));
                }
                if s == Complex64::new(0.0, 0.0) {
                    return Err(Error::KernelPole(s));
                }
                Ok(alpha * s.powf(gamma - 1.0))
            }
        }
    }

    /// `s G(s)`, finite at `s = 0` for both families.
    pub fn exchange(&self, s: Complex64) -> Complex64 {
        let zero = Complex64::new(0.0, 0.0);
        match *self {
            MemoryKernel::FirstOrder { k_f, k_r } => {
                if k_r == 0.0 {
                    Complex64::new(k_f, 0.0)
                } else {
                    s * k_f / (s + k_r)
                }
            }
            MemoryKernel::PowerLaw { alpha, gamma } => {
                if s == zero {
                    zero
                } else {
                    alpha * s.powf(gamma)
                }
            }
        }
    }

    /// `g(t)` for `t > 0`.
    pub fn time(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!("kernel time must be > 0, got {t}")));
        }
        match *self {
            MemoryKernel::FirstOrder { k_f, k_r } => Ok(k_f * (-k_r * t).exp()),
            MemoryKernel::PowerLaw { alpha, gamma } => {
                if gamma >= 1.0 {
                    return Err(Error::UndefinedTimeKernel);
                }
                Ok(alpha * t.powf(-gamma) / gamma_fn(1.0 - gamma))
            }
        }
    }
}

/// Free-function form of [`MemoryKernel::laplace`].
pub fn kernel_laplace(kernel: &MemoryKernel, s: Complex64) -> Result<Complex64> {
    kernel.laplace(s)
}

/// Free-function form of [`MemoryKernel::time`].
pub fn kernel_time(kernel: &MemoryKernel, t: f64) -> Result<f64> {
    kernel.time(t)
}
