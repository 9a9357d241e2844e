use mfk::grid::{Field, GridSpec, SpatialGrid};
use mfk::harness::weight_bound_ratio;
use mfk::mild::{self, SolverOptions};
use mfk::oracles::heat_oracle;
use mfk::particle::{
    density_estimate, simulate_frozen, solve_selfconsistent, weighted_functional, Bandwidth,
    ParticleConfig,
};
use mfk::{PresetParams, ProblemSpec};

fn spatial() -> SpatialGrid {
    SpatialGrid::new(1, 8.0, 512).unwrap()
}

#[test]
fn point_mass_heat_variance_after_unit_time() {
    let params = PresetParams {
        u0_var: 1e-6,
        ..PresetParams::default()
    };
    let problem = ProblemSpec::preset("heat", &params).unwrap();
    let field = Field::zeros(GridSpec::new(spatial(), 1.0, 64).unwrap());
    let cfg = ParticleConfig::new(100_000, 1.0 / 64.0, 17).recording_times(&[1.0]);
    let ens = simulate_frozen(&field, &problem, &cfg).unwrap();
    let (second, se) = weighted_functional(&ens, |x| x[0] * x[0], 1.0).unwrap();
    let (mean, _) = weighted_functional(&ens, |x| x[0], 1.0).unwrap();
    let var = second - mean * mean;
    assert!((var - 1.0).abs() <= 3.0 * se, "variance {var}, se {se}");
}

#[test]
fn burgers_initial_drift_functional() {
    let problem = ProblemSpec::preset("burgers", &PresetParams::default()).unwrap();
    let grid = GridSpec::new(spatial(), 1.0, 256).unwrap();
    let (u, _) = mild::solve(&problem, &grid, SolverOptions::default()).unwrap();
    let cfg = ParticleConfig::new(100_000, 1.0 / 256.0, 5).recording_times(&[]);
    let ens = simulate_frozen(&u, &problem, &cfg).unwrap();
    let drift = |x: &[f64]| {
        let mut b = [0.0];
        problem.interaction_drift(0.0, x, u.lookup(0, x), &mut b);
        b[0]
    };
    let (est, se) = weighted_functional(&ens, drift, 0.0).unwrap();
    let integrand: Vec<f64> = grid
        .spatial
        .axis_coords()
        .iter()
        .zip(u.level(0))
        .map(|(x, u0)| {
            let mut b = [0.0];
            problem.interaction_drift(0.0, &[*x], *u0, &mut b);
            b[0] * u0
        })
        .collect();
    let reference = grid.spatial.integrate(&integrand);
    assert!(
        (est - reference).abs() <= 3.0 * se,
        "{est} ± {se} vs {reference}"
    );
}

#[test]
fn selfconsistent_heat_equals_frozen_heat() {
    let problem = ProblemSpec::preset("heat", &PresetParams::default()).unwrap();
    let cfg = ParticleConfig::new(3_000, 1.0 / 32.0, 8);
    let field = Field::zeros(GridSpec::new(spatial(), 1.0, 32).unwrap());
    let frozen = simulate_frozen(&field, &problem, &cfg).unwrap();
    let (closed, _) =
        solve_selfconsistent(&problem, &spatial(), &cfg, Bandwidth::Silverman).unwrap();
    for k in [0, 16, 32] {
        assert_eq!(frozen.positions(k).unwrap(), closed.positions(k).unwrap());
        assert_eq!(
            frozen.log_weights(k).unwrap(),
            closed.log_weights(k).unwrap()
        );
    }
}

#[test]
fn selfconsistent_growth_mass() {
    let problem = ProblemSpec::preset("exponential_growth", &PresetParams::default()).unwrap();
    let cfg = ParticleConfig::new(5_000, 1.0 / 32.0, 2);
    let (ens, field) =
        solve_selfconsistent(&problem, &spatial(), &cfg, Bandwidth::Silverman).unwrap();
    let (mean_weight, se) = weighted_functional(&ens, |_| 1.0, 1.0).unwrap();
    assert_eq!(se, 0.0);
    assert!((mean_weight - 0.5f64.exp()).abs() < 1e-12);
    assert!(
        (field.mass(32) - 0.5f64.exp()).abs() < 1e-9,
        "{}",
        field.mass(32)
    );
    assert_eq!(
        field.level(0),
        &spatial().sample(|x| problem.initial().density(x))[..]
    );
}

#[test]
fn kde_error_decreases_with_particle_count() {
    let problem = ProblemSpec::preset("heat", &PresetParams::default()).unwrap();
    let field = Field::zeros(GridSpec::new(spatial(), 1.0, 16).unwrap());
    let g = spatial();
    let mut errors = Vec::new();
    for count in [1_000, 10_000, 100_000] {
        let cfg = ParticleConfig::new(count, 1.0 / 16.0, 4).recording_times(&[1.0]);
        let ens = simulate_frozen(&field, &problem, &cfg).unwrap();
        let est = density_estimate(&ens, 1.0, Bandwidth::Silverman, &g).unwrap();
        let err: Vec<f64> = est
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (v - heat_oracle(0.0, 0.04, 1.0, 1.0, g.axis_coord(i))).abs())
            .collect();
        errors.push(g.integrate(&err));
    }
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
}

#[test]
fn logistic_weights_stay_within_their_bounds() {
    let problem = ProblemSpec::preset("logistic_fkpp", &PresetParams::default()).unwrap();
    let grid = GridSpec::new(spatial(), 1.0, 64).unwrap();
    let (u, _) = mild::solve(&problem, &grid, SolverOptions::default()).unwrap();
    let ens = simulate_frozen(&u, &problem, &ParticleConfig::new(5_000, 1.0 / 64.0, 1)).unwrap();
    let ratio = weight_bound_ratio(&ens, problem.constants().m_lambda).unwrap();
    assert!(ratio <= 1.0, "{ratio}");
    let est = density_estimate(&ens, 1.0, Bandwidth::Silverman, &grid.spatial).unwrap();
    assert!((est.mass() - ens.mean_weight(64).unwrap()).abs() < 1e-9);
}
