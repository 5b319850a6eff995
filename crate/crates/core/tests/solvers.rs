//! Solver behaviour through the public API.

use proptest::prelude::*;

use tropical_ot::cli::generate_square_density;
use tropical_ot::grid::{DensityField, GridSpec};
use tropical_ot::oracle::{lp_wasserstein, DiscreteTransportInstance};
use tropical_ot::solver::SolverConfig;
use tropical_ot::trop::{trop_dist, trop_norm, TropPoint};
use tropical_ot::w1::{eikonal_residual, solve_w1, W1Problem};
use tropical_ot::w2::{solve_w2, support_reachable};
use tropical_ot::Error;

fn w1(q0: &DensityField, q1: &DensityField) -> tropical_ot::w1::W1Solution {
    let p = W1Problem::new(q0.clone(), q1.clone()).unwrap();
    solve_w1(&p, &SolverConfig { max_iter: 100_000, ..SolverConfig::w1_default() }).unwrap()
}

#[test]
fn translated_square_costs_its_tropical_shift() {
    let g = GridSpec::unit(32, 2).unwrap();
    let q0 = generate_square_density(&g, [0.3, 0.3], 0.2).unwrap();
    for (c, shift) in [([0.7, 0.3], [0.4, 0.0]), ([0.6, 0.6], [0.3, 0.3]), ([0.6, 0.1], [0.3, -0.2])] {
        let q1 = generate_square_density(&g, c, 0.2).unwrap();
        let sol = w1(&q0, &q1);
        assert!(sol.report.converged);
        let exact = trop_norm(&shift);
        assert!((sol.distance - exact).abs() <= 1.5 * g.dx(), "{c:?}: {} vs {exact}", sol.distance);
        assert!(eikonal_residual(&sol) <= 0.1);
    }
}

#[test]
fn w1_flux_is_feasible_and_matches_lp_on_a_line() {
    // mass on one row only moves horizontally; the grid and LP values agree
    let g = GridSpec::unit(12, 2).unwrap();
    let mut a = vec![0.0; 144];
    let mut b = vec![0.0; 144];
    a[2 * 12 + 5] = 0.5;
    a[3 * 12 + 5] = 0.5;
    b[8 * 12 + 5] = 0.25;
    b[10 * 12 + 5] = 0.75;
    let q0 = DensityField::new(g.clone(), a).unwrap();
    let q1 = DensityField::new(g.clone(), b).unwrap();
    let sol = w1(&q0, &q1);
    let problem = W1Problem::new(q0.clone(), q1.clone()).unwrap();
    assert!(sol.feasibility(&problem) < 1e-5);
    let lp = lp_wasserstein(&DiscreteTransportInstance::from_densities(&q0, &q1, 1.0).unwrap()).unwrap();
    assert!((sol.distance - lp.value).abs() / lp.value < 1e-3, "{} vs {}", sol.distance, lp.value);
}

#[test]
fn dirac_pair_w1_near_center_distance() {
    let g = GridSpec::unit(16, 2).unwrap();
    let (a, b) = (2 * 16 + 13, 11 * 16 + 3);
    let sol = w1(&DensityField::dirac(g.clone(), a).unwrap(), &DensityField::dirac(g.clone(), b).unwrap());
    let exact = trop_dist(&g.cell_center(a), &g.cell_center(b)).unwrap();
    assert!((sol.distance - exact).abs() <= 1.5 * g.dx());
}

#[test]
fn w2_rejects_point_masses_and_accepts_identity() {
    let g = GridSpec::unit(10, 2).unwrap();
    let a = DensityField::dirac(g.clone(), 22).unwrap();
    let b = DensityField::dirac(g.clone(), 33).unwrap();
    let cfg = SolverConfig { time_slices: 9, ..SolverConfig::w2_default() };
    assert!(matches!(solve_w2(&a, &b, &cfg), Err(Error::Unreachable { slices: 9 })));
    let sol = solve_w2(&a, &a, &cfg).unwrap();
    assert!(sol.report.converged);
    assert_eq!(sol.distance, 0.0);
}

#[test]
fn w2_overlapping_bumps_keep_slice_mass() {
    let g = GridSpec::unit(8, 2).unwrap();
    let bump = |cx: f64| {
        let v = (0..64)
            .map(|k| {
                let c = g.cell_center(k);
                0.05 + (-((c[0] - cx).powi(2) + (c[1] - 0.5).powi(2)) / 0.02).exp()
            })
            .collect();
        DensityField::normalized(g.clone(), v).unwrap()
    };
    let (q0, q1) = (bump(0.4), bump(0.6));
    assert!(support_reachable(&q0, &q1, 5).unwrap());
    let cfg = SolverConfig { time_slices: 5, max_iter: 3000, ..SolverConfig::w2_default() };
    let sol = solve_w2(&q0, &q1, &cfg).unwrap();
    assert!(sol.distance.is_finite() && sol.distance > 0.0);
    for n in 0..5 {
        assert!((sol.path.slice_mass(n) - 1.0).abs() < 1e-6, "slice {n}: {}", sol.path.slice_mass(n));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn w1_symmetric_and_mass_scaled(seed in 0u64..1000) {
        let g = GridSpec::unit(8, 2).unwrap();
        let f = |s: u64| -> Vec<f64> { (0..64).map(|k| ((k as u64 * 2654435761 + s) % 97) as f64 / 97.0).collect() };
        let q0 = DensityField::normalized(g.clone(), f(seed)).unwrap();
        let q1 = DensityField::normalized(g.clone(), f(seed + 13)).unwrap();
        let ab = w1(&q0, &q1).distance;
        let ba = w1(&q1, &q0).distance;
        prop_assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
        let scale = |q: &DensityField| DensityField::new(g.clone(), q.values().iter().map(|v| 3.0 * v).collect()).unwrap();
        let scaled = w1(&scale(&q0), &scale(&q1)).distance;
        prop_assert!((scaled - 3.0 * ab).abs() <= 1e-3 * scaled);
    }

    #[test]
    fn trop_dist_is_a_metric_on_the_torus(x in prop::collection::vec(-5.0f64..5.0, 3),
                                           y in prop::collection::vec(-5.0f64..5.0, 3),
                                           z in prop::collection::vec(-5.0f64..5.0, 3),
                                           c in -5.0f64..5.0) {
        let d = |a: &[f64], b: &[f64]| trop_dist(a, b).unwrap();
        prop_assert!((d(&x, &y) - d(&y, &x)).abs() < 1e-12);
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-12);
        // adding a constant to all homogeneous coordinates is the same point
        let hom: Vec<f64> = x.iter().copied().chain([0.0]).collect();
        let shifted: Vec<f64> = hom.iter().map(|v| v + c).collect();
        let p = TropPoint::from_homogeneous(&shifted).unwrap();
        let q = TropPoint::new(y.clone()).unwrap();
        prop_assert!((p.dist(&q).unwrap() - d(&x, &y)).abs() < 1e-9);
    }
}
