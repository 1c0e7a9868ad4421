use proptest::prelude::*;

use rivest::curve::{MeasuredCurve, VelocityGrid};
use rivest::kernel::Family;
use rivest::metrics::{kld_of, report, rmse_of};
use rivest::pbi::{project_onto_simplex, Simplex};
use rivest::prior::{sample_prior, LogNormalPrior};
use rivest::quadrature::{interp_uniform, trapezoid, trapezoid_uniform, trapezoid_weights};

fn positive_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1e-6..10.0f64, n)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn curve(conc: Vec<f64>) -> MeasuredCurve {
    let times = (0..conc.len()).map(|i| 10.0 + 3.0 * i as f64 + 0.1 * (i * i) as f64).collect();
    MeasuredCurve::new(times, conc, 250.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn projection_weights_form_a_convex_combination(
        pts in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 5), 4),
        z in prop::collection::vec(-3.0..3.0f64, 5),
    ) {
        let s = Simplex { vertices: (0..4).collect(), points: pts.clone() };
        let p = project_onto_simplex(&z, &s).unwrap();
        prop_assert!(p.weights.iter().all(|&w| w >= 0.0));
        prop_assert!((p.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for r in 0..5 {
            let combo: f64 = p.vertices.iter().zip(&p.weights).map(|(&v, w)| w * pts[v][r]).sum();
            prop_assert!((combo - p.point[r]).abs() < 1e-8);
        }
    }

    #[test]
    fn metrics_ignore_mass_scaling(
        conc in positive_vec(30),
        model in positive_vec(30),
        a in 1e-3..1e3f64,
        b in 1e-3..1e3f64,
    ) {
        let c = curve(conc);
        let base = report(&c, &model).unwrap();
        let scaled_model: Vec<f64> = model.iter().map(|x| x * b).collect();
        let other = report(&c.scaled(a), &scaled_model).unwrap();
        prop_assert!((base.rmse - other.rmse).abs() <= 1e-12 * (1.0 + base.rmse));
        prop_assert!((base.kld - other.kld).abs() <= 1e-9 * (1.0 + base.kld.abs()));
    }

    #[test]
    fn kld_is_nonnegative_and_zero_on_identity(p in positive_vec(20), q in positive_vec(20)) {
        let (p, q) = (normalized(&p), normalized(&q));
        prop_assert!(kld_of(&p, &q) >= -1e-12);
        prop_assert!(kld_of(&p, &p).abs() < 1e-12);
        prop_assert!((rmse_of(&p, &q) - rmse_of(&q, &p)).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_rules_agree(values in prop::collection::vec(-5.0..5.0f64, 2..60), step in 1e-3..2.0f64) {
        let times: Vec<f64> = (0..values.len()).map(|i| i as f64 * step).collect();
        let w = trapezoid_weights(values.len(), step);
        let weighted: f64 = w.iter().zip(&values).map(|(w, v)| w * v).sum();
        let (u, g) = (trapezoid_uniform(&values, step), trapezoid(&times, &values));
        prop_assert!((u - g).abs() < 1e-9 * (1.0 + u.abs()));
        prop_assert!((u - weighted).abs() < 1e-9 * (1.0 + u.abs()));
    }

    #[test]
    fn interpolation_hits_nodes(values in prop::collection::vec(-5.0..5.0f64, 2..40), step in 1e-2..1.0f64) {
        for (i, v) in values.iter().enumerate() {
            prop_assert!((interp_uniform(&values, step, i as f64 * step) - v).abs() < 1e-9);
        }
    }

    #[test]
    fn velocity_grid_brackets_the_peak(v_peak in 1e-3..10.0f64) {
        let g = VelocityGrid::new(v_peak, 0.9, 1.5, 0.005);
        prop_assert_eq!(g.len(), 121);
        prop_assert!((g.velocities[0] / v_peak - 0.9).abs() < 1e-12);
        prop_assert!((g.velocities[120] / v_peak - 1.5).abs() < 1e-12);
        prop_assert!(g.velocities.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn power_law_draws_keep_gamma_in_range(seed in 0u64..1000) {
        let ys = sample_prior(&LogNormalPrior::reference(Family::PowerLaw), Family::PowerLaw, 50, seed).unwrap();
        prop_assert!(ys.iter().all(|y| y.values[2] > 0.0 && y.values[2] < 1.0));
    }
}
