//! Starts from a deliberately poor estimate and refines it with LIPO.

use rivest::curve::MeasuredCurve;
use rivest::laplace::Formulation;
use rivest::prior::DimensionlessParams;
use rivest::refine::refine;
use rivest::result::{EstimationResult, Method};

fn main() -> rivest::Result<()> {
    let f = Formulation::SemiInfEquivInfinite;
    let truth = DimensionlessParams::first_order(800.0, 0.5, 2.0)?;
    let (v, l) = (0.5, 600.0);
    let times: Vec<f64> = (1..=50).map(|i| l / v * (0.6 + 0.03 * i as f64)).collect();
    let curve = MeasuredCurve::from_model(&truth.transport()?, f, v, l, &times)?;

    let guess = DimensionlessParams::first_order(600.0, 0.6, 2.4)?;
    let initial = EstimationResult::new(Method::Pbi, f, 0.49, l, guess).with_metrics(&curve)?;
    let refined = refine(&initial, &curve, 300, 7)?;
    for r in [&initial, &refined] {
        println!("{:<9} v {:.4}  rmse {:.3e}  y {:?}", r.method.name(), r.velocity, r.rmse().unwrap(), r.params.as_ref().unwrap().values);
    }
    Ok(())
}
