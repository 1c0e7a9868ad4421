//! Measured breakthrough curves and the candidate velocity grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{breakthrough_at, ForwardOptions};
use crate::laplace::{Formulation, TransportParams};

/// Minimum number of samples in a measured curve.
pub const MIN_SAMPLES: usize = 3;

/// Dimensionless window covered by the synthetic grid, in units of the peak time.
pub const WINDOW_PEAKS: f64 = 24.0;

/// A field breakthrough curve: times in seconds, concentrations in any
/// consistent unit, reach length in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredCurve {
    pub times: Vec<f64>,
    pub concentrations: Vec<f64>,
    pub reach_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
}

/// Sidecar metadata of a curve CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveMeta {
    pub reach_length_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    time_s: f64,
    concentration: f64,
}

impl MeasuredCurve {
    pub fn new(times: Vec<f64>, concentrations: Vec<f64>, reach_length: f64) -> Result<Self> {
        let c = MeasuredCurve { times, concentrations, reach_length, site: None };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if n != self.concentrations.len() {
            return Err(Error::LengthMismatch { expected: n, got: self.concentrations.len() });
        }
        if n < MIN_SAMPLES {
            return Err(Error::InvalidCurve(format!("need at least {MIN_SAMPLES} samples, got {n}")));
        }
        if !(self.reach_length > 0.0 && self.reach_length.is_finite()) {
            return Err(Error::InvalidCurve(format!("reach length must be > 0, got {}", self.reach_length)));
        }
        if self.times.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::InvalidCurve("times must be finite and nonnegative".into()));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidCurve("times must be strictly increasing".into()));
        }
        if self.concentrations.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidCurve("concentrations must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Midpoint interval weights, one-sided halves at the ends.
    pub fn deltas(&self) -> Vec<f64> {
        let t = &self.times;
        let n = t.len();
        (0..n)
            .map(|i| {
                let lo = if i == 0 { t[0] } else { t[i - 1] };
                let hi = if i + 1 == n { t[n - 1] } else { t[i + 1] };
                0.5 * (hi - lo)
            })
            .collect()
    }

    /// Index of the earliest maximal sample.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.concentrations.iter().enumerate() {
            if c > self.concentrations[best] {
                best = i;
            }
        }
        best
    }

    pub fn peak_time(&self) -> f64 {
        self.times[self.peak_index()]
    }

    /// Whether the maximum sits strictly inside the record.
    pub fn peak_is_interior(&self) -> bool {
        let i = self.peak_index();
        i > 0 && i + 1 < self.len()
    }

    /// `L / t_peak`.
    pub fn peak_velocity(&self) -> f64 {
        self.reach_length / self.peak_time()
    }

    /// `sum c_i Delta_i`.
    pub fn weighted_mass(&self) -> f64 {
        self.concentrations.iter().zip(self.deltas()).map(|(c, d)| c * d).sum()
    }

    /// Zero samples at the largest original spacing before the first and
    /// after the last measurement, covering `[0, 24 t_peak]`.
    pub fn pad_with_zeros(&self) -> MeasuredCurve {
        let h = self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        let end = WINDOW_PEAKS * self.peak_time();
        let tol = 1e-9 * h;
        let mut before = Vec::new();
        let mut t = self.times[0] - h;
        while t > tol {
            before.push(t);
            t -= h;
        }
        if self.times[0] > tol {
            before.push(0.0);
        }
        before.reverse();
        let mut after = Vec::new();
        let mut k = 1.0;
        let last = self.times[self.len() - 1];
        while last + k * h <= end + tol {
            after.push(last + k * h);
            k += 1.0;
        }
        let zeros = |n| std::iter::repeat_n(0.0, n);
        MeasuredCurve {
            times: before.iter().chain(&self.times).chain(&after).copied().collect(),
            concentrations: zeros(before.len())
                .chain(self.concentrations.iter().copied())
                .chain(zeros(after.len()))
                .collect(),
            reach_length: self.reach_length,
            site: self.site.clone(),
        }
    }

    /// Same curve with concentrations multiplied by `k`.
    pub fn scaled(&self, k: f64) -> MeasuredCurve {
        MeasuredCurve { concentrations: self.concentrations.iter().map(|c| c * k).collect(), ..self.clone() }
    }

    /// Noiseless record of a forward model at dimensional `times`, with
    /// `velocity` in m/s and `length` in m.
    pub fn from_model(
        params: &TransportParams,
        formulation: Formulation,
        velocity: f64,
        length: f64,
        times: &[f64],
    ) -> Result<Self> {
        let tau: Vec<f64> = times.iter().map(|t| t * velocity / length).collect();
        let c = breakthrough_at(params, formulation, &tau, &ForwardOptions::default())?;
        MeasuredCurve::new(times.to_vec(), c, length)
    }

    /// Reads `time_s,concentration` CSV plus the JSON sidecar.
    pub fn read(csv_path: &Path, meta_path: &Path) -> Result<Self> {
        let meta: CurveMeta = serde_json::from_slice(&std::fs::read(meta_path)?)?;
        let mut reader = csv::Reader::from_path(csv_path)?;
        let headers = reader.headers()?.clone();
        if headers.iter().map(str::trim).collect::<Vec<_>>() != ["time_s", "concentration"] {
            return Err(Error::Format(format!("expected header `time_s,concentration`, got `{}`", headers.as_slice())));
        }
        let mut times = Vec::new();
        let mut conc = Vec::new();
        for row in reader.deserialize() {
            let row: Row = row?;
            times.push(row.time_s);
            conc.push(row.concentration);
        }
        let mut c = MeasuredCurve::new(times, conc, meta.reach_length_m)?;
        c.site = meta.site;
        Ok(c)
    }

    pub fn write(&self, csv_path: &Path, meta_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(["time_s", "concentration"])?;
        for (t, c) in self.times.iter().zip(&self.concentrations) {
            w.write_record([format!("{t:.8e}"), format!("{c:.8e}")])?;
        }
        w.flush()?;
        let meta = CurveMeta { reach_length_m: self.reach_length, site: self.site.clone(), extra: Default::default() };
        std::fs::write(meta_path, serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }
}

/// Candidate velocities `(lo + step m) L / t_peak`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityGrid {
    pub peak_velocity: f64,
    pub velocities: Vec<f64>,
}

impl VelocityGrid {
    /// `[0.9, 1.5] L / t_peak` at 0.5% resolution: 121 velocities.
    pub fn for_curve(curve: &MeasuredCurve) -> Self {
        Self::new(curve.peak_velocity(), 0.9, 1.5, 0.005)
    }

    pub fn new(peak_velocity: f64, lo: f64, hi: f64, step: f64) -> Self {
        let count = ((hi - lo) / step).round() as usize + 1;
        VelocityGrid {
            peak_velocity,
            velocities: (0..count).map(|m| (lo + step * m as f64) * peak_velocity).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }
}
