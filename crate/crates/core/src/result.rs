//! Estimation results shared by every estimator.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::curve::MeasuredCurve;
use crate::error::{Error, Result};
use crate::forward::{breakthrough_at, ForwardOptions};
use crate::laplace::{ade_analytical, Formulation, TransportParams};
use crate::metrics::{self, MetricReport};
use crate::prior::DimensionlessParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "PBI")]
    Pbi,
    #[serde(rename = "NNI")]
    Nni,
    LaplaceFit,
    Moments,
    #[serde(rename = "ADE-LS")]
    AdeLs,
    #[serde(rename = "ADE-Peak")]
    AdePeak,
    #[serde(rename = "LIPO")]
    Lipo,
    #[serde(rename = "PBI+LIPO")]
    PbiLipo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pbi => "PBI",
            Method::Nni => "NNI",
            Method::LaplaceFit => "LaplaceFit",
            Method::Moments => "Moments",
            Method::AdeLs => "ADE-LS",
            Method::AdePeak => "ADE-Peak",
            Method::Lipo => "LIPO",
            Method::PbiLipo => "PBI+LIPO",
        }
    }

    /// ADE fits carry only `(v, Pe)`.
    pub fn is_ade(self) -> bool {
        matches!(self, Method::AdeLs | Method::AdePeak)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s.to_ascii_lowercase().as_str() {
            "pbi" => Method::Pbi,
            "nni" => Method::Nni,
            "laplace" | "laplacefit" | "laplace-fit" => Method::LaplaceFit,
            "moments" => Method::Moments,
            "ade-ls" => Method::AdeLs,
            "ade-peak" => Method::AdePeak,
            "lipo" => Method::Lipo,
            "pbi+lipo" => Method::PbiLipo,
            _ => return Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
        };
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub method: Method,
    pub formulation: Formulation,
    /// m/s
    pub velocity: f64,
    pub reach_length: f64,
    pub peclet: f64,
    /// Absent for ADE fits.
    pub params: Option<DimensionlessParams>,
    /// `|Z*(v*) - r*(v*)|` for manifold methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    pub converged: bool,
}

impl EstimationResult {
    pub fn new(method: Method, formulation: Formulation, velocity: f64, reach_length: f64, params: DimensionlessParams) -> Self {
        EstimationResult {
            method,
            formulation,
            velocity,
            reach_length,
            peclet: params.peclet(),
            params: Some(params),
            residual: None,
            weights: Vec::new(),
            vertices: Vec::new(),
            metrics: None,
            converged: true,
        }
    }

    pub fn ade(method: Method, velocity: f64, reach_length: f64, peclet: f64) -> Self {
        EstimationResult {
            method,
            formulation: Formulation::Infinite,
            velocity,
            reach_length,
            peclet,
            params: None,
            residual: None,
            weights: Vec::new(),
            vertices: Vec::new(),
            metrics: None,
            converged: true,
        }
    }

    /// Dispersion coefficient `L v / Pe`.
    pub fn dispersion(&self) -> f64 {
        self.reach_length * self.velocity / self.peclet
    }

    pub fn transport(&self) -> Result<TransportParams> {
        match &self.params {
            Some(p) => p.transport(),
            None => TransportParams::ade(self.peclet),
        }
    }

    /// Model concentrations (unit dimensionless mass) at dimensional times.
    pub fn model_at(&self, times: &[f64]) -> Result<Vec<f64>> {
        let scale = self.velocity / self.reach_length;
        let tau: Vec<f64> = times.iter().map(|t| t * scale).collect();
        if self.params.is_none() {
            return tau.iter().map(|&t| ade_analytical(self.peclet, 1.0, 1.0, t, self.formulation)).collect();
        }
        breakthrough_at(&self.transport()?, self.formulation, &tau, &ForwardOptions::default())
    }

    pub fn evaluate(&self, curve: &MeasuredCurve) -> Result<MetricReport> {
        metrics::report(curve, &self.model_at(&curve.times)?)
    }

    pub fn with_metrics(mut self, curve: &MeasuredCurve) -> Result<Self> {
        self.metrics = Some(self.evaluate(curve)?);
        Ok(self)
    }

    pub fn rmse(&self) -> Option<f64> {
        self.metrics.map(|m| m.rmse)
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}
