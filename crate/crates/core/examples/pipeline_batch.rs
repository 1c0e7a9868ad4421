//! Runs the cached batch pipeline on a directory of generated twins, prints
//! the per-method summary and exports plot data.

use rivest::curve::MeasuredCurve;
use rivest::kernel::Family;
use rivest::laplace::Formulation;
use rivest::pipeline::{export_plot_data, pipeline_run, ExportKind, RunConfig};
use rivest::prior::{sample_prior, LogNormalPrior};
use rivest::result::Method;

fn main() -> rivest::Result<()> {
    let root = std::env::temp_dir().join("rivest-pipeline-example");
    let curves = root.join("curves");
    std::fs::create_dir_all(&curves)?;
    let ys = sample_prior(&LogNormalPrior::reference(Family::FirstOrder), Family::FirstOrder, 10, 4)?;
    for (k, y) in ys.iter().enumerate() {
        let (v, l) = (0.2 + 0.06 * k as f64, 400.0 + 50.0 * k as f64);
        let times: Vec<f64> = (1..=45).map(|i| l / v * (0.4 + 0.04 * i as f64)).collect();
        let c = MeasuredCurve::from_model(&y.transport()?, Formulation::SemiInfEquivInfinite, v, l, &times)?;
        c.write(&curves.join(format!("reach{k:02}.csv")), &curves.join(format!("reach{k:02}.json")))?;
    }

    let config = RunConfig {
        curves_dir: curves,
        output_dir: root.join("out"),
        n_synth: 300,
        methods: vec![Method::Pbi, Method::Nni, Method::LaplaceFit],
        ..RunConfig::default()
    };
    let report = pipeline_run(&config)?;
    if let Some(s) = report.sigma_c {
        println!("sigma_c {s:.2e}");
    }
    for s in &report.summary {
        println!("{:<12} ok {:>2} failed {}  median rmse {:.2e}", s.method.name(), s.succeeded, s.failed, s.median_rmse.unwrap_or(f64::NAN));
    }
    for kind in [ExportKind::ErrorCdf, ExportKind::ParamScatter] {
        let files = export_plot_data(&report, kind, &root.join("plots"))?;
        println!("{kind:?}: {} file(s) in {}", files.len(), root.join("plots").display());
    }
    Ok(())
}
