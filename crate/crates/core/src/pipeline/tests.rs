use super::*;
use crate::prior::sample_prior;

/// Writes `n` noiseless twins from the reference prior into `dir`.
fn twins(dir: &Path, n: usize) {
    let prior = LogNormalPrior::reference(Family::FirstOrder);
    let ys = sample_prior(&prior, Family::FirstOrder, n, 11).unwrap();
    for (k, y) in ys.iter().enumerate() {
        let (v, l) = (0.3 + 0.05 * k as f64, 500.0 + 40.0 * k as f64);
        let tp = l / v;
        let times: Vec<f64> = (1..=45).map(|i| tp * (0.3 + 0.08 * i as f64 + 0.002 * (i * i) as f64)).collect();
        let c = MeasuredCurve::from_model(&y.transport().unwrap(), Formulation::SemiInfEquivInfinite, v, l, &times).unwrap();
        c.write(&dir.join(format!("c{k:02}.csv")), &dir.join(format!("c{k:02}.json"))).unwrap();
    }
}

fn config(curves: &Path, out: &Path) -> RunConfig {
    RunConfig {
        curves_dir: curves.into(),
        output_dir: out.into(),
        n_synth: 150,
        n_modes: 12,
        methods: vec![Method::Pbi, Method::Nni, Method::AdeLs],
        ..RunConfig::default()
    }
}

#[test]
fn fresh_run_then_cached_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let (curves, out) = (dir.path().join("curves"), dir.path().join("out"));
    std::fs::create_dir_all(&curves).unwrap();
    twins(&curves, 8);
    std::fs::write(curves.join("broken.csv"), "time_s,concentration\n1,oops\n").unwrap();
    std::fs::write(curves.join("broken.json"), r#"{"reach_length_m": 100}"#).unwrap();
    let cfg = config(&curves, &out);

    let (first, stages) = pipeline_run_traced(&cfg).unwrap();
    let names: Vec<&str> = stages.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(names, ["coarse", "prior", "dataset", "kl", "sigma_c", "estimate"]);
    assert!(stages.iter().all(|s| s.executed));
    assert_eq!(first.rows.len(), 9 * 3);
    assert_eq!(first.curves.iter().filter(|c| c.split == SplitLabel::Test).count(), 1);

    let broken = first.curves.iter().find(|c| c.name == "broken").unwrap();
    assert!(broken.error.is_some());
    for r in first.rows.iter().filter(|r| r.curve == "broken") {
        assert!(r.result.is_none() && r.error.is_some());
    }
    let ok = first.rows.iter().filter(|r| r.curve != "broken" && r.result.is_some()).count();
    assert_eq!(ok, 8 * 3);
    let pbi = first.summary.iter().find(|s| s.method == Method::Pbi).unwrap();
    assert_eq!((pbi.succeeded, pbi.failed), (8, 1));

    let (second, stages) = pipeline_run_traced(&cfg).unwrap();
    assert!(stages.iter().all(|s| !s.executed));
    assert_eq!(first, second);

    // a new KL truncation reruns exactly the downstream stages
    let (_, stages) = pipeline_run_traced(&RunConfig { n_modes: 10, ..cfg.clone() }).unwrap();
    let ran: Vec<&str> = stages.iter().filter(|s| s.executed).map(|s| s.name.as_str()).collect();
    assert_eq!(ran, ["kl", "sigma_c", "estimate"]);

    let plots = dir.path().join("plots");
    let cdf = export_plot_data(&second, ExportKind::ErrorCdf, &plots).unwrap();
    assert_eq!(cdf.len(), 3);
    let rows = csv::Reader::from_path(&cdf[0]).unwrap().records().count();
    assert_eq!(rows, 8);
    let scatter = export_plot_data(&second, ExportKind::ParamScatter, &plots).unwrap();
    assert_eq!(csv::Reader::from_path(&scatter[0]).unwrap().records().count(), 9);
    let overlay = export_plot_data(&second, ExportKind::BtcOverlay, &plots).unwrap();
    assert_eq!(overlay.len(), 8);
    let mut r = csv::Reader::from_path(&overlay[0]).unwrap();
    assert_eq!(r.headers().unwrap().len(), 2 + 3);
    assert!("scatter-plot".parse::<ExportKind>().is_err());
}

#[test]
fn config_round_trip_and_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig { methods: vec![Method::Pbi, Method::PbiLipo], sigma_c: SigmaPolicy::Value(1e-6), ..RunConfig::default() };
    let p = dir.path().join("run.json");
    cfg.write_json(&p).unwrap();
    assert_eq!(RunConfig::read_json(&p).unwrap(), cfg);
    let partial: RunConfig = serde_json::from_str(r#"{"family": "power_law", "seed": 3}"#).unwrap();
    assert_eq!(partial.family, Family::PowerLaw);
    assert_eq!(partial.n_synth, 1000);
    let bad = RunConfig { family: Family::PowerLaw, methods: vec![Method::Moments], ..RunConfig::default() };
    assert!(bad.validate().is_err());
    let missing = RunConfig { dataset: Some(dir.path().join("nope.bin")), ..RunConfig::default() };
    assert!(missing.validate().is_err());
    assert_eq!("auto".parse::<SigmaPolicy>().unwrap(), SigmaPolicy::Auto);
    assert!("-1".parse::<SigmaPolicy>().is_err());
}

#[test]
fn split_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    for i in 0..20 {
        std::fs::write(dir.path().join(format!("{i:02}.csv")), "").unwrap();
    }
    let a = list_curves(dir.path(), 0.9, 5).unwrap();
    let b = list_curves(dir.path(), 0.9, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.iter().filter(|c| c.split == SplitLabel::Test).count(), 2);
}
