//! Mild solve of the heat preset compared with the closed-form Gaussian.

use mfk::grid::{GridSpec, SpatialGrid};
use mfk::mild::{self, SolverOptions};
use mfk::oracles::heat_oracle;
use mfk::{PresetParams, ProblemSpec};

fn main() -> mfk::Result<()> {
    let params = PresetParams::default();
    let problem = ProblemSpec::preset("heat", &params)?;
    let grid = GridSpec::new(SpatialGrid::new(1, 8.0, 512)?, 1.0, 64)?;
    let (u, report) = mild::solve(&problem, &grid, SolverOptions::default())?;

    println!("slabs {}, iterations {:?}", report.slabs, report.iterations);
    println!("{:>6} {:>12} {:>12}", "t", "mass", "L1 error");
    for k in (0..=64).step_by(16) {
        let t = grid.time(k);
        let err: Vec<f64> = u
            .level(k)
            .iter()
            .zip(grid.spatial.axis_coords())
            .map(|(v, x)| (v - heat_oracle(params.u0_mean, params.u0_var, params.nu, t, x)).abs())
            .collect();
        println!(
            "{t:>6.3} {:>12.9} {:>12.3e}",
            u.mass(k),
            grid.spatial.integrate(&err)
        );
    }
    Ok(())
}
