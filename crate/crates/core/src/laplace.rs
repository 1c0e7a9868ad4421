//! Laplace-domain solution of the dimensionless transport equation with
//! immobile-zone exchange, plus the closed-form advection-dispersion
//! solutions used as oracles and by the ADE fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::MemoryKernel;

/// Domain and boundary/initial-condition set of a point-release tracer test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Formulation {
    /// Semi-infinite domain, Dirichlet inlet without upstream dispersion.
    SemiInfNoUpstream = 1,
    /// Semi-infinite domain, Robin inlet with upstream dispersion.
    SemiInfUpstream = 2,
    /// Infinite domain with an initial pulse at the origin.
    Infinite = 3,
    /// Semi-infinite domain whose inlet condition reproduces the infinite
    /// domain for `x > 0`.
    SemiInfEquivInfinite = 4,
}

impl Formulation {
    pub const ALL: [Formulation; 4] = [
        Formulation::SemiInfNoUpstream,
        Formulation::SemiInfUpstream,
        Formulation::Infinite,
        Formulation::SemiInfEquivInfinite,
    ];

    pub fn number(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Formulation {
    type Error = Error;

    fn try_from(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Formulation::SemiInfNoUpstream),
            2 => Ok(Formulation::SemiInfUpstream),
            3 => Ok(Formulation::Infinite),
            4 => Ok(Formulation::SemiInfEquivInfinite),
            _ => Err(Error::InvalidParameter(format!("formulation must be 1-4, got {n}"))),
        }
    }
}

impl From<Formulation> for u8 {
    fn from(f: Formulation) -> u8 {
        f as u8
    }
}

impl std::fmt::Display for Formulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

impl std::str::FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n: u8 = s
            .trim()
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("bad formulation `{s}`")))?;
        Formulation::try_from(n)
    }
}

/// Dimensionless transport parameters of one forward solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransportParams {
    pub peclet: f64,
    pub beta: f64,
    pub kernel: MemoryKernel,
    #[serde(default = "unit_mass")]
    pub mass: f64,
}

fn unit_mass() -> f64 {
    1.0
}

impl TransportParams {
    pub fn new(peclet: f64, beta: f64, kernel: MemoryKernel, mass: f64) -> Result<Self> {
        let p = TransportParams { peclet, beta, kernel, mass };
        p.validate()?;
        Ok(p)
    }

    /// Pure advection-dispersion (no exchange).
    pub fn ade(peclet: f64) -> Result<Self> {
        Self::new(peclet, 0.0, MemoryKernel::FirstOrder { k_f: 1.0, k_r: 1.0 }, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peclet > 0.0 && self.peclet.is_finite()) {
            return Err(Error::InvalidParameter(format!("Pe must be > 0, got {}", self.peclet)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be > 0, got {}", self.mass)));
        }
        if self.beta > 0.0 {
            self.kernel.validate()?;
        }
        Ok(())
    }

    /// `s + beta s G(s)`; the kernel is ignored when `beta = 0`.
    pub fn effective_frequency(&self, s: Complex64) -> Complex64 {
        if self.beta == 0.0 {
            s
        } else {
            s + self.beta * self.kernel.exchange(s)
        }
    }
}

/// Inlet factor `B(s)` of the Laplace-domain solution.
pub fn boundary_factor(
    formulation: Formulation,
    params: &TransportParams,
    s: Complex64,
) -> Result<Complex64> {
    let pe = params.peclet;
    let one = Complex64::new(1.0, 0.0);
    let root = || (4.0 * params.effective_frequency(s) + pe).sqrt();
    let b = match formulation {
        Formulation::SemiInfNoUpstream => one,
        Formulation::SemiInfUpstream => one / (0.5 + root() / (2.0 * pe.sqrt())),
        Formulation::Infinite | Formulation::SemiInfEquivInfinite => pe.sqrt() / root(),
    };
    finite(b, s)
}

/// Exponent `(x/2)(Pe - sqrt(Pe (4 s' + Pe)))` written without cancellation.
fn decay_exponent(pe: f64, s_eff: Complex64, x: f64) -> Complex64 {
    let sq = (pe * pe + 4.0 * pe * s_eff).sqrt();
    0.5 * x * (-4.0 * pe * s_eff) / (pe + sq)
}

/// `C(x, s)` of the dimensionless problem. For `x < 0` only the infinite
/// domain (formulation 3) is defined.
pub fn laplace_solution(
    params: &TransportParams,
    formulation: Formulation,
    x: f64,
    s: Complex64,
) -> Result<Complex64> {
    let pe = params.peclet;
    let s_eff = params.effective_frequency(s);
    finite(s_eff, s)?;
    let b = boundary_factor(formulation, params, s)?;
    let exponent = if x >= 0.0 {
        decay_exponent(pe, s_eff, x)
    } else if formulation == Formulation::Infinite {
        pe * x / 2.0 - (pe * x * x / 4.0 * (4.0 * s_eff + pe)).sqrt()
    } else {
        return Err(Error::InvalidParameter(format!(
            "x = {x} < 0 is only defined for formulation 3"
        )));
    };
    if exponent.re < -700.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    finite(params.mass * b * exponent.exp(), s)
}

/// `ln(C(1, s) / C(1, 0))` at real `s >= 0`, independent of the mass.
pub fn log_transfer(params: &TransportParams, formulation: Formulation, s: f64) -> Result<f64> {
    let sc = Complex64::new(s, 0.0);
    let s_eff = params.effective_frequency(sc);
    finite(s_eff, sc)?;
    let b = boundary_factor(formulation, params, sc)?;
    let f = decay_exponent(params.peclet, s_eff, 1.0).re + b.re.ln();
    if f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonFiniteTransform { s: sc })
    }
}

fn finite(z: Complex64, s: Complex64) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::NonFiniteTransform { s })
    }
}

/// Closed-form advection-dispersion solution (no exchange) for formulations
/// 1, 3 and 4. Returns zero for `t <= 0`.
pub fn ade_analytical(pe: f64, mass: f64, x: f64, t: f64, formulation: Formulation) -> Result<f64> {
    if formulation == Formulation::SemiInfUpstream {
        return Err(Error::UnsupportedFormulation(2));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let spread = 4.0 * t / pe;
    let gauss = (-(x - t).powi(2) / spread).exp();
    let value = match formulation {
        Formulation::SemiInfNoUpstream => {
            mass * x / (4.0 * std::f64::consts::PI * t.powi(3) / pe).sqrt() * gauss
        }
        _ => mass / (std::f64::consts::PI * spread).sqrt() * gauss,
    };
    Ok(value)
}
