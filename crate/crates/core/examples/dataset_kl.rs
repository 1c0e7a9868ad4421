//! Draws a small synthetic dataset, fits a truncated expansion and reports
//! the energy captured and the reconstruction error of a few members.

use rivest::dataset::generate_dataset;
use rivest::kernel::Family;
use rivest::kl::fit_kl;
use rivest::laplace::Formulation;
use rivest::prior::LogNormalPrior;

fn main() -> rivest::Result<()> {
    let family = Family::FirstOrder;
    let ds = generate_dataset(&LogNormalPrior::reference(family), 200, Formulation::SemiInfEquivInfinite, family, 1)?;
    println!("dataset: {} curves, hash {}", ds.len(), &ds.hash()?[..16]);
    let kl = fit_kl(&ds, 20)?;
    let total: f64 = kl.eigenvalues.iter().sum();
    let mut acc = 0.0;
    for (j, l) in kl.eigenvalues.iter().enumerate().take(8) {
        acc += l;
        println!("mode {j:>2}: lambda {l:.3e}  cumulative {:.4}", acc / total);
    }
    for i in 0..3 {
        let c = ds.curve(i);
        let back = kl.reconstruct(&kl.project(c)?.0)?;
        let err = c.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        println!("curve {i}: reconstruction L2 error {err:.2e}");
    }
    Ok(())
}
