//! Solves the forward problem for one parameter set under all four
//! formulations and prints peak time, peak height and mass.

use rivest::forward::{breakthrough, TimeGrid};
use rivest::laplace::Formulation;
use rivest::prior::DimensionlessParams;
use rivest::quadrature::trapezoid_uniform;

fn main() -> rivest::Result<()> {
    let y = DimensionlessParams::first_order(300.0, 0.4, 2.0)?;
    let grid = TimeGrid::canonical();
    println!("{:<28} {:>8} {:>10} {:>10}", "formulation", "t_peak", "c_peak", "mass");
    for f in Formulation::ALL {
        let c = breakthrough(&y.transport()?, f, &grid)?;
        let (i, peak) = c.iter().enumerate().fold((0, f64::MIN), |a, (i, &x)| if x > a.1 { (i, x) } else { a });
        println!("{:<28} {:>8.4} {:>10.4} {:>10.6}", format!("{f:?}"), grid.time(i), peak, trapezoid_uniform(&c, grid.step));
    }
    Ok(())
}
