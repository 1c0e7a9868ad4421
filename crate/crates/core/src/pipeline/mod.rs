//! Batch estimation over a directory of measured curves with cached stages.

mod export;
#[cfg(test)]
mod tests;

pub use export::{export_plot_data, ExportKind};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coarse::{self, CoarseOptions};
use crate::container::sha256_hex;
use crate::curve::{MeasuredCurve, VelocityGrid};
use crate::dataset::{generate_dataset, SyntheticDataset};
use crate::embedding::{default_sigma_candidates, embed_over_velocities, tune_sigma_c, EmbeddedCurve};
use crate::error::{Error, Result};
use crate::kernel::Family;
use crate::kl::{fit_kl, KlModel};
use crate::laplace::Formulation;
use crate::pbi::{estimate_nni, estimate_pbi, regularization_weight, Manifold, DEFAULT_DEVIATION_TARGET};
use crate::prior::{fit_prior, DimensionlessParams, LogNormalPrior};
use crate::refine::{lipo_estimate, prior_box, refine};
use crate::result::{EstimationResult, Method};

const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SigmaPolicy {
    Auto,
    Value(f64),
}

impl std::str::FromStr for SigmaPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(SigmaPolicy::Auto);
        }
        let v: f64 = s.parse().map_err(|_| Error::InvalidParameter(format!("sigma_c must be `auto` or a number, got `{s}`")))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma_c must be > 0, got {v}")));
        }
        Ok(SigmaPolicy::Value(v))
    }
}

/// Velocity grid as multiples of `L / t_peak`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySpec {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for VelocitySpec {
    fn default() -> Self {
        VelocitySpec { lo: 0.9, hi: 1.5, step: 0.005 }
    }
}

impl VelocitySpec {
    pub fn grid(&self, curve: &MeasuredCurve) -> VelocityGrid {
        VelocityGrid::new(curve.peak_velocity(), self.lo, self.hi, self.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Directory of `<name>.csv` curves with `<name>.json` sidecars.
    pub curves_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Existing artifacts; generated when absent.
    pub prior: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub kl: Option<PathBuf>,
    pub family: Family,
    pub formulation: Formulation,
    pub methods: Vec<Method>,
    pub sigma_c: SigmaPolicy,
    pub velocity_grid: VelocitySpec,
    pub seed: u64,
    pub n_synth: usize,
    pub n_modes: usize,
    pub prior_inflation: f64,
    pub refine_budget: usize,
    pub train_fraction: f64,
    /// Calibrate the velocity penalty for power-law runs.
    pub regularize: bool,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            curves_dir: PathBuf::from("curves"),
            output_dir: PathBuf::from("out"),
            prior: None,
            dataset: None,
            kl: None,
            family: Family::FirstOrder,
            formulation: Formulation::SemiInfEquivInfinite,
            methods: vec![Method::Pbi, Method::Nni],
            sigma_c: SigmaPolicy::Auto,
            velocity_grid: VelocitySpec::default(),
            seed: 42,
            n_synth: 1000,
            n_modes: 20,
            prior_inflation: 2.0,
            refine_budget: 300,
            train_fraction: 0.9,
            regularize: true,
            workers: None,
        }
    }
}

impl RunConfig {
    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidParameter("method list is empty".into()));
        }
        if self.methods.contains(&Method::Moments) && self.family != Family::FirstOrder {
            return Err(Error::FamilyMismatch { expected: "first_order".into(), got: self.family.to_string() });
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::InvalidParameter(format!("train fraction must be in (0, 1], got {}", self.train_fraction)));
        }
        let v = self.velocity_grid;
        if !(v.lo > 0.0 && v.hi >= v.lo && v.step > 0.0) {
            return Err(Error::InvalidParameter("velocity grid needs 0 < lo <= hi and step > 0".into()));
        }
        for p in [&self.prior, &self.dataset, &self.kl].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::InvalidParameter(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitLabel {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveEntry {
    pub name: String,
    pub csv: PathBuf,
    pub meta: PathBuf,
    pub split: SplitLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRow {
    pub curve: String,
    pub method: Method,
    pub split: SplitLabel,
    pub result: Option<EstimationResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub succeeded: usize,
    pub failed: usize,
    pub median_rmse: Option<f64>,
    pub median_kld: Option<f64>,
    pub median_rmse_train: Option<f64>,
    pub median_rmse_test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub family: Family,
    pub formulation: Formulation,
    pub methods: Vec<Method>,
    pub sigma_c: Option<f64>,
    pub lambda_reg: Option<f64>,
    pub dataset_hash: Option<String>,
    pub curves: Vec<CurveEntry>,
    pub rows: Vec<BatchRow>,
    pub summary: Vec<MethodSummary>,
}

impl BatchReport {
    pub fn read_json(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn row(&self, curve: &str, method: Method) -> Option<&BatchRow> {
        self.rows.iter().find(|r| r.curve == curve && r.method == method)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub executed: bool,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

pub fn summarize(methods: &[Method], rows: &[BatchRow]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|&m| {
            let mine: Vec<&BatchRow> = rows.iter().filter(|r| r.method == m).collect();
            let metric = |split: Option<SplitLabel>, f: fn(&crate::metrics::MetricReport) -> f64| {
                median(
                    mine.iter()
                        .filter(|r| split.is_none_or(|s| r.split == s))
                        .filter_map(|r| r.result.as_ref()?.metrics.as_ref().map(f))
                        .collect(),
                )
            };
            MethodSummary {
                method: m,
                succeeded: mine.iter().filter(|r| r.result.is_some()).count(),
                failed: mine.iter().filter(|r| r.result.is_none()).count(),
                median_rmse: metric(None, |x| x.rmse),
                median_kld: metric(None, |x| x.kld),
                median_rmse_train: metric(Some(SplitLabel::Train), |x| x.rmse),
                median_rmse_test: metric(Some(SplitLabel::Test), |x| x.rmse),
            }
        })
        .collect()
}

/// Sorted curve files of a directory, labelled by a seeded 90/10-style split.
pub fn list_curves(dir: &Path, train_fraction: f64, seed: u64) -> Result<Vec<CurveEntry>> {
    let mut csvs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();
    let n = csvs.len();
    let n_test = if n < 2 { 0 } else { ((1.0 - train_fraction) * n as f64).round() as usize };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut split = vec![SplitLabel::Train; n];
    for &i in &order[..n_test] {
        split[i] = SplitLabel::Test;
    }
    Ok(csvs
        .into_iter()
        .zip(split)
        .map(|(csv, split)| {
            let name = csv.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let meta = csv.with_extension("json");
            CurveEntry { name, csv, meta, split, error: None }
        })
        .collect())
}

fn key(parts: &[&str]) -> String {
    sha256_hex(parts.join("\u{1f}").as_bytes())
}

fn json_key<T: Serialize>(x: &T) -> Result<String> {
    Ok(sha256_hex(&serde_json::to_vec(x)?))
}

/// Stage keys of the previous run plus the records of this one.
struct Cache {
    dir: PathBuf,
    previous: BTreeMap<String, String>,
    records: Vec<StageRecord>,
}

impl Cache {
    fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let previous = match std::fs::read(dir.join(MANIFEST)) {
            Ok(b) => serde_json::from_slice(&b).unwrap_or_default(),
            Err(_) => BTreeMap::new(),
        };
        Ok(Cache { dir: dir.to_path_buf(), previous, records: Vec::new() })
    }

    fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    /// Loads the artifact when the key matches, otherwise computes and saves it.
    fn stage<T>(
        &mut self,
        name: &str,
        key: &str,
        file: &str,
        load: impl FnOnce(&Path) -> Result<T>,
        compute: impl FnOnce() -> Result<T>,
        save: impl FnOnce(&T, &Path) -> Result<()>,
    ) -> Result<T> {
        let path = self.path(file);
        if self.previous.get(name).is_some_and(|k| k == key) && path.exists() {
            match load(&path) {
                Ok(x) => {
                    log::info!("stage {name}: cached");
                    self.record(name, key, false)?;
                    return Ok(x);
                }
                Err(e) => log::warn!("stage {name}: cached artifact unreadable ({e}), recomputing"),
            }
        }
        log::info!("stage {name}: running");
        let x = compute()?;
        save(&x, &path)?;
        self.record(name, key, true)?;
        Ok(x)
    }

    fn record(&mut self, name: &str, key: &str, executed: bool) -> Result<()> {
        self.records.push(StageRecord { name: name.into(), key: key.into(), executed });
        self.previous.insert(name.into(), key.into());
        std::fs::write(self.path(MANIFEST), serde_json::to_vec_pretty(&self.previous)?)?;
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(p: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&std::fs::read(p)?)?)
}

fn write_json<T: Serialize>(x: &T, p: &Path) -> Result<()> {
    std::fs::write(p, serde_json::to_vec_pretty(x)?)?;
    Ok(())
}

fn file_hash(p: &Path) -> String {
    std::fs::read(p).map(|b| sha256_hex(&b)).unwrap_or_else(|_| "missing".into())
}

/// Best coarse estimate per training curve, or why none was found.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CoarseRow {
    curve: String,
    result: Option<EstimationResult>,
    error: Option<String>,
}

fn coarse_best(curve: &MeasuredCurve, family: Family, formulation: Formulation) -> Result<EstimationResult> {
    let opts = CoarseOptions::default();
    let mut methods = vec![Method::LaplaceFit];
    if family == Family::FirstOrder {
        methods.push(Method::Moments);
    }
    let mut best: Option<EstimationResult> = None;
    let mut last_err = None;
    for m in methods {
        match coarse::estimate(curve, m, family, formulation, &opts) {
            Ok(r) if best.as_ref().is_none_or(|b| r.rmse() < b.rmse()) => best = Some(r),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::Estimation("no coarse method ran".into())))
}

/// Runs the whole pipeline and writes `report.json` to the output directory.
pub fn pipeline_run(config: &RunConfig) -> Result<BatchReport> {
    pipeline_run_traced(config).map(|(r, _)| r)
}

/// As [`pipeline_run`], also returning which stages executed.
pub fn pipeline_run_traced(config: &RunConfig) -> Result<(BatchReport, Vec<StageRecord>)> {
    config.validate()?;
    match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| run(config)),
        None => run(config),
    }
}

fn run(config: &RunConfig) -> Result<(BatchReport, Vec<StageRecord>)> {
    let mut cache = Cache::open(&config.output_dir)?;
    let mut entries = list_curves(&config.curves_dir, config.train_fraction, config.seed)?;
    let mut curves_key = Vec::new();
    let loaded: Vec<Option<MeasuredCurve>> = entries
        .iter_mut()
        .map(|e| {
            curves_key.push(format!("{}:{}:{}", e.name, file_hash(&e.csv), file_hash(&e.meta)));
            match MeasuredCurve::read(&e.csv, &e.meta) {
                Ok(c) => Some(c),
                Err(err) => {
                    log::warn!("curve {}: {err}", e.name);
                    e.error = Some(err.to_string());
                    None
                }
            }
        })
        .collect();
    let curves_key = key(&curves_key.iter().map(String::as_str).collect::<Vec<_>>());
    let train: Vec<(&str, &MeasuredCurve)> = entries
        .iter()
        .zip(&loaded)
        .filter(|(e, _)| e.split == SplitLabel::Train)
        .filter_map(|(e, c)| c.as_ref().map(|c| (e.name.as_str(), c)))
        .collect();
    let (family, formulation) = (config.family, config.formulation);

    // dataset, with the prior (and its coarse estimates) only when it must be generated
    let (dataset, dataset_key) = match &config.dataset {
        Some(p) => {
            let ds = SyntheticDataset::read(p)?;
            if ds.family != family || ds.formulation != formulation {
                return Err(Error::FamilyMismatch {
                    expected: format!("{family}/{formulation}"),
                    got: format!("{}/{}", ds.family, ds.formulation),
                });
            }
            let h = ds.hash()?;
            (ds, h)
        }
        None => {
            let prior_key = match &config.prior {
                Some(p) => key(&["prior-file", &file_hash(p)]),
                None => {
                    let k = key(&["coarse", &curves_key, family.name(), &formulation.to_string()]);
                    let rows: Vec<CoarseRow> = cache.stage(
                        "coarse",
                        &k,
                        "coarse.json",
                        read_json,
                        || {
                            Ok(train
                                .par_iter()
                                .map(|(name, c)| match coarse_best(c, family, formulation) {
                                    Ok(r) => CoarseRow { curve: name.to_string(), result: Some(r), error: None },
                                    Err(e) => CoarseRow { curve: name.to_string(), result: None, error: Some(e.to_string()) },
                                })
                                .collect())
                        },
                        write_json,
                    )?;
                    let k = key(&["prior", &k, &config.prior_inflation.to_string()]);
                    cache.stage(
                        "prior",
                        &k,
                        "prior.json",
                        LogNormalPrior::read_json,
                        || {
                            let est: Vec<DimensionlessParams> = rows.iter().filter_map(|r| r.result.as_ref()?.params).collect();
                            fit_prior(&est, config.prior_inflation)
                        },
                        |p, path| p.write_json(path),
                    )?;
                    k
                }
            };
            let prior = match &config.prior {
                Some(p) => LogNormalPrior::read_json(p)?,
                None => LogNormalPrior::read_json(&cache.path("prior.json"))?,
            };
            let k = key(&["dataset", &prior_key, &config.n_synth.to_string(), family.name(), &formulation.to_string(), &config.seed.to_string()]);
            let ds = cache.stage(
                "dataset",
                &k,
                "dataset.bin",
                SyntheticDataset::read,
                || generate_dataset(&prior, config.n_synth, formulation, family, config.seed),
                |d, p| d.write(p),
            )?;
            let h = ds.hash()?;
            (ds, h)
        }
    };

    let (kl, kl_key) = match &config.kl {
        Some(p) => {
            let kl = KlModel::read(p)?;
            if kl.dataset_hash.as_ref().is_some_and(|h| *h != dataset_key) {
                return Err(Error::Format("KL model was fitted to a different dataset".into()));
            }
            (kl, key(&["kl-file", &file_hash(p)]))
        }
        None => {
            let k = key(&["kl", &dataset_key, &config.n_modes.to_string()]);
            let kl = cache.stage("kl", &k, "kl.bin", KlModel::read, || fit_kl(&dataset, config.n_modes), |m, p| m.write(p))?;
            (kl, k)
        }
    };

    let sigma_key = key(&["sigma", &kl_key, &curves_key, &json_key(&config.sigma_c)?, &config.seed.to_string()]);
    let sigma_c: f64 = match config.sigma_c {
        SigmaPolicy::Value(v) => v,
        SigmaPolicy::Auto => cache.stage(
            "sigma_c",
            &sigma_key,
            "sigma_c.json",
            read_json,
            || {
                let cs: Vec<MeasuredCurve> = train.iter().map(|(_, c)| (*c).clone()).collect();
                tune_sigma_c(&cs, &kl, &default_sigma_candidates(), config.seed)
            },
            write_json,
        )?,
    };

    let needs_manifold = config.methods.iter().any(|m| matches!(m, Method::Pbi | Method::Nni | Method::PbiLipo));
    let est_key = key(&[
        "estimate",
        &sigma_key,
        &sigma_c.to_string(),
        &kl_key,
        &dataset_key,
        &json_key(&(&config.methods, config.velocity_grid, config.refine_budget, config.regularize))?,
    ]);
    let (rows, lambda_reg): (Vec<BatchRow>, Option<f64>) = cache.stage(
        "estimate",
        &est_key,
        "results.json",
        read_json,
        || {
            let manifold = if needs_manifold { Some(Manifold::new(&dataset, &kl)?) } else { None };
            let embedded: Vec<Option<Result<EmbeddedCurve>>> = loaded
                .par_iter()
                .map(|c| {
                    let c = c.as_ref()?;
                    needs_manifold.then(|| embed_over_velocities(c, &kl, &config.velocity_grid.grid(c), sigma_c))
                })
                .collect();
            let lambda = match (&manifold, family, config.regularize) {
                (Some(m), Family::PowerLaw, true) => {
                    let train_emb: Vec<EmbeddedCurve> = entries
                        .iter()
                        .zip(&embedded)
                        .filter(|(e, _)| e.split == SplitLabel::Train)
                        .filter_map(|(_, z)| z.as_ref()?.as_ref().ok().cloned())
                        .collect();
                    Some(regularization_weight(&train_emb, m, DEFAULT_DEVIATION_TARGET)?.lambda)
                }
                _ => None,
            };
            let rows: Vec<Vec<BatchRow>> = entries
                .par_iter()
                .enumerate()
                .map(|(k, e)| {
                    let ctx = CurveContext {
                        curve: loaded[k].as_ref(),
                        load_error: e.error.as_deref(),
                        embedded: embedded[k].as_ref(),
                        manifold: manifold.as_ref(),
                        prior: &dataset.prior,
                        lambda,
                        seed: config.seed.wrapping_add(k as u64),
                    };
                    estimate_curve(&ctx, e, config)
                })
                .collect();
            Ok((rows.into_iter().flatten().collect(), lambda))
        },
        write_json,
    )?;

    let summary = summarize(&config.methods, &rows);
    let report = BatchReport {
        family,
        formulation,
        methods: config.methods.clone(),
        sigma_c: Some(sigma_c),
        lambda_reg,
        dataset_hash: Some(dataset_key),
        curves: entries,
        rows,
        summary,
    };
    report.write_json(&config.output_dir.join("report.json"))?;
    Ok((report, cache.records))
}

struct CurveContext<'a> {
    curve: Option<&'a MeasuredCurve>,
    load_error: Option<&'a str>,
    embedded: Option<&'a Result<EmbeddedCurve>>,
    manifold: Option<&'a Manifold>,
    prior: &'a LogNormalPrior,
    lambda: Option<f64>,
    seed: u64,
}

fn estimate_curve(ctx: &CurveContext, entry: &CurveEntry, config: &RunConfig) -> Vec<BatchRow> {
    let mut pbi: Option<Result<EstimationResult>> = None;
    config
        .methods
        .iter()
        .map(|&method| {
            let out = match ctx.curve {
                None => Err(Error::InvalidCurve(ctx.load_error.unwrap_or("unreadable").to_string())),
                Some(curve) => one_method(ctx, curve, method, config, &mut pbi),
            };
            let (result, error) = match out {
                Ok(r) => (Some(r), None),
                Err(e) => {
                    log::warn!("curve {} / {method}: {e}", entry.name);
                    (None, Some(e.to_string()))
                }
            };
            BatchRow { curve: entry.name.clone(), method, split: entry.split, result, error }
        })
        .collect()
}

fn one_method(
    ctx: &CurveContext,
    curve: &MeasuredCurve,
    method: Method,
    config: &RunConfig,
    pbi: &mut Option<Result<EstimationResult>>,
) -> Result<EstimationResult> {
    let (family, formulation) = (config.family, config.formulation);
    let manifold_parts = || -> Result<(&EmbeddedCurve, &Manifold)> {
        let e = ctx.embedded.ok_or_else(|| Error::Estimation("curve was not embedded".into()))?;
        let e = e.as_ref().map_err(|err| Error::Estimation(err.to_string()))?;
        let m = ctx.manifold.ok_or_else(|| Error::Estimation("no manifold".into()))?;
        Ok((e, m))
    };
    let mut run_pbi = || -> Result<EstimationResult> {
        if pbi.is_none() {
            *pbi = Some(manifold_parts().and_then(|(e, m)| estimate_pbi(e, m, ctx.lambda)?.with_metrics(curve)));
        }
        match pbi.as_ref() {
            Some(Ok(r)) => Ok(r.clone()),
            Some(Err(e)) => Err(Error::Estimation(e.to_string())),
            None => unreachable!(),
        }
    };
    match method {
        Method::Pbi => run_pbi(),
        Method::Nni => {
            let (e, m) = manifold_parts()?;
            estimate_nni(e, m)?.with_metrics(curve)
        }
        Method::PbiLipo => {
            let start = run_pbi()?;
            refine(&start, curve, config.refine_budget, ctx.seed)
        }
        Method::Lipo => {
            let bx = prior_box(ctx.prior, family, curve.peak_velocity(), config.refine_budget.max(6), ctx.seed)?;
            lipo_estimate(curve, family, formulation, &bx, Method::Lipo)
        }
        coarse_method => coarse::estimate(curve, coarse_method, family, formulation, &CoarseOptions::default()),
    }
}
