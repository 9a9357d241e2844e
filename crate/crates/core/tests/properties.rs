use mfk::grid::{Field, GridSpec, SpatialGrid};
use mfk::harness::compare_fields;
use mfk::mild::{self, SolverOptions};
use mfk::particle::{mean_and_standard_error, weighted_kde};
use mfk::{PresetParams, ProblemSpec};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn kde_mass_is_the_mean_weight(
        points in prop::collection::vec((-3.0f64..3.0, 0.1f64..4.0), 1..60),
        h in 0.05f64..0.5,
    ) {
        let g = SpatialGrid::new(1, 8.0, 801).unwrap();
        let (pos, w): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        let est = weighted_kde(&g, &pos, &w, h);
        let mean_w = w.iter().sum::<f64>() / w.len() as f64;
        prop_assert!(est.iter().all(|v| *v >= 0.0));
        prop_assert!((g.integrate(&est) - mean_w).abs() <= 1e-8 * mean_w);
    }

    #[test]
    fn distances_are_symmetric_and_nonnegative(a in prop::collection::vec(-1.0f64..1.0, 33 * 3), b in prop::collection::vec(-1.0f64..1.0, 33 * 3)) {
        let grid = GridSpec::new(SpatialGrid::new(1, 2.0, 33).unwrap(), 1.0, 2).unwrap();
        let fa = Field::from_values(grid.clone(), a).unwrap();
        let fb = Field::from_values(grid, b).unwrap();
        let ab = compare_fields(&fa, &fb).unwrap();
        let ba = compare_fields(&fb, &fa).unwrap();
        prop_assert_eq!(&ab.l1, &ba.l1);
        prop_assert!(ab.l1.iter().chain(&ab.linf).all(|v| *v >= 0.0));
    }

    #[test]
    fn constant_samples_have_zero_standard_error(v in -1e6f64..1e6, n in 1usize..500) {
        let (m, se) = mean_and_standard_error(&vec![v; n]);
        prop_assert_eq!(m, v);
        prop_assert_eq!(se, 0.0);
    }

    #[test]
    fn drift_free_solves_conserve_mass(mean in -1.0f64..1.0, var in 0.02f64..0.5, nu in 0.2f64..2.0) {
        let params = PresetParams { u0_mean: mean, u0_var: var, nu, ..PresetParams::default() };
        let problem = ProblemSpec::preset("heat", &params).unwrap();
        let grid = GridSpec::new(SpatialGrid::new(1, 10.0, 256).unwrap(), 1.0, 8).unwrap();
        let (u, _) = mild::solve(&problem, &grid, SolverOptions::default()).unwrap();
        for k in 0..grid.levels() {
            prop_assert!((u.mass(k) - 1.0).abs() < 1e-9);
        }
    }
}
