//! Self-consistent particles for Burgers: the field at each level is the
//! weighted KDE of the ensemble. Prints the L¹ distance to the mild solution
//! at `T` as the particle count grows.

use mfk::grid::{GridSpec, SpatialGrid};
use mfk::harness::level_distance;
use mfk::mild::{self, SolverOptions};
use mfk::particle::{solve_selfconsistent, Bandwidth, ParticleConfig, Recording};
use mfk::{PresetParams, ProblemSpec};

fn main() -> mfk::Result<()> {
    let problem = ProblemSpec::preset("burgers", &PresetParams::default())?;
    let spatial = SpatialGrid::new(1, 8.0, 512)?;
    let grid = GridSpec::new(spatial.clone(), 1.0, 256)?;
    let (u, _) = mild::solve(&problem, &grid, SolverOptions::default())?;

    for count in [1_000, 10_000, 100_000] {
        let mut config = ParticleConfig::new(count, 1.0 / 64.0, 3);
        config.recording = Recording::Levels(vec![]);
        let (_, field) = solve_selfconsistent(&problem, &spatial, &config, Bandwidth::Silverman)?;
        let (l1, linf) = level_distance(&field, 64, &u, 256)?;
        println!("N = {count:>6}: L1 {l1:.4e}, Linf {linf:.4e}");
    }
    Ok(())
}
