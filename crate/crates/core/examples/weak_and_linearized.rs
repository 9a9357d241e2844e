//! Two consistency checks on a converged Burgers solution: the weak-form
//! residual against smooth test functions, and the linear solve with
//! coefficients frozen from the solution itself.

use mfk::grid::{GridSpec, SpatialGrid};
use mfk::mild::{self, weak_residual, SolverOptions, TimeRule};
use mfk::problem::GaussMonomial;
use mfk::{PresetParams, ProblemSpec};

fn main() -> mfk::Result<()> {
    let problem = ProblemSpec::preset("burgers", &PresetParams::default())?;
    let grid = GridSpec::new(SpatialGrid::new(1, 8.0, 512)?, 1.0, 256)?;
    let options = SolverOptions {
        tol: 1e-10,
        time_rule: TimeRule::Trapezoid,
        ..SolverOptions::default()
    };
    let (u, _) = mild::solve(&problem, &grid, options.clone())?;

    let mut bumped = u.clone();
    for k in 1..grid.levels() {
        for (i, v) in bumped.level_mut(k).iter_mut().enumerate() {
            let x = grid.spatial.axis_coord(i);
            *v += 0.1 * (-(x * x) / 0.1).exp();
        }
    }
    for phi in GaussMonomial::basket(1, 3) {
        let r = weak_residual(&u, &phi, 0.5, &problem)?;
        let rb = weak_residual(&bumped, &phi, 0.5, &problem)?;
        println!(
            "exp(-x²)x^{}: residual {r:.2e}, with bump {rb:.2e}",
            phi.power
        );
    }

    let (drift, growth) = mild::freeze_coefficients(&problem, &u);
    let (lin, _) = mild::solve_linearized(
        problem.kernel(),
        &drift,
        &growth,
        u.level(0),
        &grid,
        options,
    )?;
    let gap = lin.difference(&u)?;
    let worst = (0..grid.levels()).map(|k| gap.l1_at(k)).fold(0.0, f64::max);
    println!("linearized vs nonlinear: worst L1 gap {worst:.2e}");
    Ok(())
}
