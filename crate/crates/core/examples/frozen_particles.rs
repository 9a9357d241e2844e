//! Weighted particles driven by a frozen field reproduce its moments.
//! Uses the exponential-growth preset, where the weights are exactly
//! `e^{λt}`, and Burgers with `u` taken from the mild solve.

use mfk::grid::{GridSpec, SpatialGrid};
use mfk::mild::{self, SolverOptions};
use mfk::particle::{simulate_frozen, weighted_functional, ParticleConfig};
use mfk::problem::{GaussMonomial, TestFunction};
use mfk::{PresetParams, ProblemSpec};

fn main() -> mfk::Result<()> {
    let params = PresetParams::default();
    let grid = GridSpec::new(SpatialGrid::new(1, 8.0, 512)?, 1.0, 256)?;

    for name in ["exponential_growth", "burgers"] {
        let problem = ProblemSpec::preset(name, &params)?;
        let (u, _) = mild::solve(&problem, &grid, SolverOptions::default())?;
        let config = ParticleConfig::new(20_000, 1.0 / 256.0, 42).recording_times(&[0.5, 1.0]);
        let ensemble = simulate_frozen(&u, &problem, &config)?;
        println!("{name}:");
        for f in GaussMonomial::basket(1, 3) {
            for t in [0.5, 1.0] {
                let (est, se) = weighted_functional(&ensemble, |x| f.value(x), t)?;
                let k = grid.level_of(t).unwrap();
                let prod: Vec<f64> = grid
                    .spatial
                    .axis_coords()
                    .iter()
                    .zip(u.level(k))
                    .map(|(x, v)| f.value(&[*x]) * v)
                    .collect();
                let reference = grid.spatial.integrate(&prod);
                println!(
                    "  exp(-x²)x^{} at t = {t}: {est:.5} ± {se:.5}, grid {reference:.5}, z = {:+.2}",
                    f.power,
                    (est - reference) / se
                );
            }
        }
    }
    Ok(())
}
