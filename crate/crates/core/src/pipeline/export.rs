use std::path::{Path, PathBuf};

use super::BatchReport;
use crate::curve::MeasuredCurve;
use crate::error::{Error, Result};
use crate::prior::DimensionlessParams;
use crate::result::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    BtcOverlay,
    ErrorCdf,
    ParamScatter,
}

impl std::str::FromStr for ExportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "btc-overlay" => Ok(ExportKind::BtcOverlay),
            "error-cdf" => Ok(ExportKind::ErrorCdf),
            "param-scatter" => Ok(ExportKind::ParamScatter),
            other => Err(Error::UnknownExportKind(other.into())),
        }
    }
}

/// Nine significant digits.
fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn file_safe(m: Method) -> String {
    m.name().replace('+', "_")
}

/// Writes plot-ready CSV files into `out_dir` and returns their paths.
pub fn export_plot_data(report: &BatchReport, kind: ExportKind, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    match kind {
        ExportKind::BtcOverlay => btc_overlay(report, out_dir),
        ExportKind::ErrorCdf => error_cdf(report, out_dir),
        ExportKind::ParamScatter => param_scatter(report, out_dir).map(|p| vec![p]),
    }
}

/// One file per readable curve: measured series plus every method's model,
/// scaled to the measured interval-weighted mass.
fn btc_overlay(report: &BatchReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for entry in report.curves.iter().filter(|e| e.error.is_none()) {
        let curve = MeasuredCurve::read(&entry.csv, &entry.meta)?;
        let deltas = curve.deltas();
        let mass = curve.weighted_mass();
        let mut columns: Vec<Option<Vec<f64>>> = Vec::new();
        for &m in &report.methods {
            let model = match report.row(&entry.name, m).and_then(|r| r.result.as_ref()) {
                Some(r) => {
                    let q = r.model_at(&curve.times)?;
                    let s: f64 = q.iter().zip(&deltas).map(|(q, d)| q * d).sum();
                    (s > 0.0).then(|| q.iter().map(|q| q * mass / s).collect())
                }
                None => None,
            };
            columns.push(model);
        }
        let path = out_dir.join(format!("btc-overlay_{}.csv", entry.name));
        let mut w = csv::Writer::from_path(&path)?;
        let mut header = vec!["time_s".to_string(), "measured".to_string()];
        header.extend(report.methods.iter().map(|m| m.name().to_string()));
        w.write_record(&header)?;
        for i in 0..curve.len() {
            let mut rec = vec![num(curve.times[i]), num(curve.concentrations[i])];
            rec.extend(columns.iter().map(|c| c.as_ref().map_or(String::new(), |c| num(c[i]))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// One file per method with independently sorted RMSE and KLD values.
fn error_cdf(report: &BatchReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for &m in &report.methods {
        let metrics: Vec<_> = report
            .rows
            .iter()
            .filter(|r| r.method == m)
            .filter_map(|r| r.result.as_ref()?.metrics)
            .collect();
        let mut rmse: Vec<f64> = metrics.iter().map(|x| x.rmse).collect();
        let mut kld: Vec<f64> = metrics.iter().map(|x| x.kld).collect();
        rmse.sort_by(f64::total_cmp);
        kld.sort_by(f64::total_cmp);
        let path = out_dir.join(format!("error-cdf_{}.csv", file_safe(m)));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(["cdf", "rmse", "kld"])?;
        let n = rmse.len();
        for i in 0..n {
            w.write_record([num((i + 1) as f64 / n as f64), num(rmse[i]), num(kld[i])])?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}

/// One row per curve from the first listed method.
fn param_scatter(report: &BatchReport, out_dir: &Path) -> Result<PathBuf> {
    let method = report.methods[0];
    let names = DimensionlessParams::names(report.family);
    let path = out_dir.join("param-scatter.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["curve", "split", "method", "reach_length_m", "velocity", names[0], names[1], names[2]])?;
    for entry in &report.curves {
        let split = match entry.split {
            super::SplitLabel::Train => "train",
            super::SplitLabel::Test => "test",
        };
        let mut rec = vec![entry.name.clone(), split.to_string(), method.name().to_string()];
        match report.row(&entry.name, method).and_then(|r| r.result.as_ref()) {
            Some(r) => {
                rec.push(num(r.reach_length));
                rec.push(num(r.velocity));
                rec.push(num(r.peclet));
                match &r.params {
                    Some(p) => rec.extend([num(p.values[1]), num(p.values[2])]),
                    None => rec.extend([String::new(), String::new()]),
                }
            }
            None => rec.extend(std::iter::repeat_n(String::new(), 5)),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(path)
}
