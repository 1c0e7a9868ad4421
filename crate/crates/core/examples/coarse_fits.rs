//! Fits a noiseless sparse curve with every forward-solver-free method.

use rivest::coarse::{estimate, CoarseOptions};
use rivest::curve::MeasuredCurve;
use rivest::kernel::Family;
use rivest::laplace::Formulation;
use rivest::prior::DimensionlessParams;
use rivest::result::Method;

fn main() -> rivest::Result<()> {
    let f = Formulation::SemiInfEquivInfinite;
    let truth = DimensionlessParams::first_order(500.0, 0.3, 3.0)?;
    let (v, l) = (0.4, 800.0);
    let times: Vec<f64> = (1..=60).map(|i| l / v * (0.5 + 0.1 * i as f64)).collect();
    let curve = MeasuredCurve::from_model(&truth.transport()?, f, v, l, &times)?;
    println!("truth: v {v:.4}, y {:?}", truth.values);
    for m in [Method::LaplaceFit, Method::Moments, Method::AdeLs, Method::AdePeak] {
        let r = estimate(&curve, m, Family::FirstOrder, f, &CoarseOptions::default())?;
        let y = r.params.as_ref().map(|p| format!("{:?}", p.values)).unwrap_or_else(|| format!("Pe {:.1}", r.peclet));
        println!("{:<12} v {:.4}  rmse {:.2e}  {y}", m.name(), r.velocity, r.rmse().unwrap_or(f64::NAN));
    }
    Ok(())
}
