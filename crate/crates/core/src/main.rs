use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use rivest::coarse::{self, CoarseOptions};
use rivest::curve::{MeasuredCurve, VelocityGrid};
use rivest::dataset::{generate_dataset, SyntheticDataset};
use rivest::embedding::{default_sigma_candidates, embed_over_velocities, tune_sigma_c};
use rivest::forward::{breakthrough, TimeGrid};
use rivest::kernel::Family;
use rivest::kl::{fit_kl, KlModel};
use rivest::laplace::Formulation;
use rivest::metrics;
use rivest::pbi::{estimate_nni, estimate_pbi, Manifold};
use rivest::pipeline::{export_plot_data, pipeline_run, ExportKind, RunConfig, SigmaPolicy};
use rivest::prior::{DimensionlessParams, LogNormalPrior};
use rivest::refine::refine;
use rivest::result::{EstimationResult, Method};
use rivest::{Error, Result};

#[derive(Parser)]
#[command(name = "rivest", version, about = "Transport parameter estimation for tracer breakthrough curves")]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CurveArgs {
    /// `time_s,concentration` CSV.
    #[arg(long)]
    curve: PathBuf,
    /// JSON sidecar with `reach_length_m`.
    #[arg(long)]
    meta: PathBuf,
}

impl CurveArgs {
    fn load(&self) -> Result<MeasuredCurve> {
        MeasuredCurve::read(&self.curve, &self.meta)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Dimensionless breakthrough curve of one parameter vector.
    Forward {
        #[arg(long)]
        params: PathBuf,
        #[arg(long, default_value = "4")]
        formulation: Formulation,
        #[arg(long, default_value_t = 1.0 / 150.0)]
        dt: f64,
        #[arg(long, default_value_t = 24.0)]
        tmax: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward-solver-free estimate.
    Coarse {
        #[command(flatten)]
        curve: CurveArgs,
        /// laplace, moments, ade-ls or ade-peak
        #[arg(long)]
        method: Method,
        #[arg(long, default_value = "first_order")]
        family: Family,
        #[arg(long, default_value = "4")]
        formulation: Formulation,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthetic dataset sampled from a prior.
    Generate {
        #[arg(long)]
        prior: PathBuf,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value = "first_order")]
        family: Family,
        #[arg(long, default_value = "4")]
        formulation: Formulation,
        #[arg(long)]
        out: PathBuf,
    },
    /// KL model of a dataset.
    FitKl {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 20)]
        n_modes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// KL coefficients of a curve over the velocity grid.
    Embed {
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long)]
        kl: PathBuf,
        #[arg(long, default_value = "auto")]
        sigma_c: SigmaPolicy,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PBI or NNI estimate against a dataset.
    Estimate {
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        kl: PathBuf,
        #[arg(long, default_value = "pbi")]
        method: Method,
        #[arg(long, default_value = "auto")]
        sigma_c: SigmaPolicy,
        /// Velocity penalty weight.
        #[arg(long)]
        lambda_reg: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward-model refinement of an earlier result.
    Refine {
        #[arg(long)]
        result: PathBuf,
        #[command(flatten)]
        curve: CurveArgs,
        #[arg(long, default_value_t = 300)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Error metrics of a model curve against a measured one.
    Metrics {
        #[command(flatten)]
        curve: CurveArgs,
        /// `time_s,concentration` CSV, interpolated linearly onto the measured times.
        #[arg(long)]
        model_curve: PathBuf,
    },
    /// Batch pipeline over a curve directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        curves_dir: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        prior: Option<PathBuf>,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        kl: Option<PathBuf>,
        #[arg(long)]
        family: Option<Family>,
        #[arg(long)]
        formulation: Option<Formulation>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<Method>>,
        #[arg(long)]
        sigma_c: Option<SigmaPolicy>,
        #[arg(long)]
        n_synth: Option<usize>,
        #[arg(long)]
        n_modes: Option<usize>,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Plot-ready CSV from a batch report.
    Export {
        #[arg(long)]
        report: PathBuf,
        /// btc-overlay, error-cdf or param-scatter
        #[arg(long)]
        kind: ExportKind,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn emit<T: Serialize>(x: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(x)?;
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

fn sigma_for(policy: SigmaPolicy, curve: &MeasuredCurve, kl: &KlModel, seed: u64) -> Result<f64> {
    match policy {
        SigmaPolicy::Value(v) => Ok(v),
        SigmaPolicy::Auto => tune_sigma_c(std::slice::from_ref(curve), kl, &default_sigma_candidates(), seed),
    }
}

fn interp(ts: &[f64], cs: &[f64], t: f64) -> f64 {
    if t <= ts[0] || t >= ts[ts.len() - 1] {
        return if t == ts[0] { cs[0] } else if t == ts[ts.len() - 1] { cs[cs.len() - 1] } else { 0.0 };
    }
    let j = ts.partition_point(|&x| x <= t);
    let w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
    cs[j - 1] * (1.0 - w) + cs[j] * w
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    #[serde(flatten)]
    result: &'a EstimationResult,
    reconstructed_csv: PathBuf,
}

fn execute(cli: Cli) -> Result<()> {
    let seed = cli.seed;
    match cli.command {
        Command::Forward { params, formulation, dt, tmax, out } => {
            let y: DimensionlessParams = serde_json::from_slice(&std::fs::read(params)?)?;
            let grid = TimeGrid::spanning(dt, tmax)?;
            let c = breakthrough(&y.transport()?, formulation, &grid)?;
            let mut w = csv::Writer::from_path(out)?;
            w.write_record(["t_hat", "c_hat"])?;
            for (t, c) in grid.times().iter().zip(&c) {
                w.write_record([format!("{t:.8e}"), format!("{c:.8e}")])?;
            }
            w.flush()?;
        }
        Command::Coarse { curve, method, family, formulation, out } => {
            let r = coarse::estimate(&curve.load()?, method, family, formulation, &CoarseOptions::default())?;
            emit(&r, out.as_deref())?;
        }
        Command::Generate { prior, n, family, formulation, out } => {
            let prior = LogNormalPrior::read_json(&prior)?;
            let ds = generate_dataset(&prior, n, formulation, family, seed)?;
            ds.write(&out)?;
            println!("{}", ds.hash()?);
        }
        Command::FitKl { dataset, n_modes, out } => {
            let kl = fit_kl(&SyntheticDataset::read(&dataset)?, n_modes)?;
            kl.write(&out)?;
            let captured: f64 = kl.eigenvalues.iter().sum::<f64>() / kl.total_variance;
            println!("{n_modes} modes capture {:.6}% of the variance", 100.0 * captured);
        }
        Command::Embed { curve, kl, sigma_c, out } => {
            let curve = curve.load()?;
            let kl = KlModel::read(&kl)?;
            let sigma = sigma_for(sigma_c, &curve, &kl, seed)?;
            let e = embed_over_velocities(&curve, &kl, &VelocityGrid::for_curve(&curve), sigma)?;
            emit(&e, out.as_deref())?;
        }
        Command::Estimate { curve, dataset, kl, method, sigma_c, lambda_reg, out } => {
            let curve = curve.load()?;
            let ds = SyntheticDataset::read(&dataset)?;
            let kl = KlModel::read(&kl)?;
            let sigma = sigma_for(sigma_c, &curve, &kl, seed)?;
            let e = embed_over_velocities(&curve, &kl, &VelocityGrid::for_curve(&curve), sigma)?;
            let manifold = Manifold::new(&ds, &kl)?;
            let r = match method {
                Method::Pbi => estimate_pbi(&e, &manifold, lambda_reg)?,
                Method::Nni => estimate_nni(&e, &manifold)?,
                other => return Err(Error::InvalidParameter(format!("estimate runs pbi or nni, not {other}"))),
            }
            .with_metrics(&curve)?;
            let model_path = out.with_extension("model.csv");
            let model = r.model_at(&curve.times)?;
            let mass = curve.weighted_mass() / model.iter().zip(curve.deltas()).map(|(q, d)| q * d).sum::<f64>();
            MeasuredCurve { concentrations: model.iter().map(|q| q * mass).collect(), ..curve.clone() }
                .write(&model_path, &out.with_extension("model.json"))?;
            emit(&EstimateOutput { result: &r, reconstructed_csv: model_path }, Some(&out))?;
        }
        Command::Refine { result, curve, budget, out } => {
            let initial = EstimationResult::read_json(&result)?;
            let r = refine(&initial, &curve.load()?, budget, seed)?;
            emit(&r, out.as_deref())?;
        }
        Command::Metrics { curve, model_curve } => {
            let curve = curve.load()?;
            let mut reader = csv::Reader::from_path(&model_curve)?;
            let (mut ts, mut cs) = (Vec::new(), Vec::new());
            for rec in reader.records() {
                let rec = rec?;
                let parse = |i: usize| -> Result<f64> {
                    rec.get(i).and_then(|s| s.trim().parse().ok()).ok_or_else(|| Error::Format(format!("bad row {rec:?}")))
                };
                ts.push(parse(0)?);
                cs.push(parse(1)?);
            }
            if ts.len() < 2 {
                return Err(Error::Format("model curve needs at least two rows".into()));
            }
            let model: Vec<f64> = curve.times.iter().map(|&t| interp(&ts, &cs, t)).collect();
            emit(&metrics::report(&curve, &model)?, None)?;
        }
        Command::Run {
            config,
            curves_dir,
            output_dir,
            prior,
            dataset,
            kl,
            family,
            formulation,
            methods,
            sigma_c,
            n_synth,
            n_modes,
            budget,
            workers,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::read_json(&p)?,
                None => RunConfig::default(),
            };
            cfg.seed = seed;
            if let Some(x) = curves_dir {
                cfg.curves_dir = x;
            }
            if let Some(x) = output_dir {
                cfg.output_dir = x;
            }
            cfg.prior = prior.or(cfg.prior);
            cfg.dataset = dataset.or(cfg.dataset);
            cfg.kl = kl.or(cfg.kl);
            cfg.family = family.unwrap_or(cfg.family);
            cfg.formulation = formulation.unwrap_or(cfg.formulation);
            cfg.methods = methods.unwrap_or(cfg.methods);
            cfg.sigma_c = sigma_c.unwrap_or(cfg.sigma_c);
            cfg.n_synth = n_synth.unwrap_or(cfg.n_synth);
            cfg.n_modes = n_modes.unwrap_or(cfg.n_modes);
            cfg.refine_budget = budget.unwrap_or(cfg.refine_budget);
            cfg.workers = workers.or(cfg.workers);
            let report = pipeline_run(&cfg)?;
            for s in &report.summary {
                let fmt = |x: Option<f64>| x.map_or("-".to_string(), |x| format!("{x:.4e}"));
                println!(
                    "{:<10} ok {:>4}  failed {:>4}  median rmse {}  median kld {}",
                    s.method.name(),
                    s.succeeded,
                    s.failed,
                    fmt(s.median_rmse),
                    fmt(s.median_kld)
                );
            }
        }
        Command::Export { report, kind, out_dir } => {
            let report = rivest::pipeline::BatchReport::read_json(&report)?;
            for p in export_plot_data(&report, kind, &out_dir)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Err(e) = execute(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
