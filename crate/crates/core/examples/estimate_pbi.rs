//! Embeds a sparse twin curve and estimates its parameters with PBI and NNI,
//! tuning the noise level on a handful of companion curves.

use rivest::curve::{MeasuredCurve, VelocityGrid};
use rivest::dataset::generate_dataset;
use rivest::embedding::{default_sigma_candidates, embed_over_velocities, tune_sigma_c};
use rivest::kernel::Family;
use rivest::kl::fit_kl;
use rivest::laplace::Formulation;
use rivest::pbi::{estimate_nni, estimate_pbi, Manifold};
use rivest::prior::{sample_prior, LogNormalPrior};

fn main() -> rivest::Result<()> {
    let (family, f) = (Family::FirstOrder, Formulation::SemiInfEquivInfinite);
    let prior = LogNormalPrior::reference(family);
    let ds = generate_dataset(&prior, 400, f, family, 3)?;
    let kl = fit_kl(&ds, 20)?;
    let manifold = Manifold::new(&ds, &kl)?;

    let curves: Vec<MeasuredCurve> = sample_prior(&prior, family, 6, 99)?
        .iter()
        .enumerate()
        .map(|(k, y)| {
            let (v, l) = (0.3 + 0.1 * k as f64, 1000.0);
            let times: Vec<f64> = (1..=40).map(|i| l / v * (0.4 + 0.04 * i as f64)).collect();
            MeasuredCurve::from_model(&y.transport()?, f, v, l, &times)
        })
        .collect::<rivest::Result<_>>()?;
    let sigma = tune_sigma_c(&curves, &kl, &default_sigma_candidates(), 0)?;
    println!("sigma_c {sigma:.2e}");

    let curve = &curves[0];
    let embedded = embed_over_velocities(curve, &kl, &VelocityGrid::for_curve(curve), sigma)?;
    for r in [estimate_pbi(&embedded, &manifold, None)?, estimate_nni(&embedded, &manifold)?] {
        let r = r.with_metrics(curve)?;
        println!("{:<4} v {:.4} (true 0.3000)  rmse {:.2e}  y {:?}", r.method.name(), r.velocity, r.rmse().unwrap(), r.params.as_ref().unwrap().values);
    }
    Ok(())
}
