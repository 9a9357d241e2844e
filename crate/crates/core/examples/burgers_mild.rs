//! Viscous Burgers by Picard iteration on slabs, checked against a
//! conservative finite-volume reference and the Cole-Hopf formula.

use mfk::grid::{GridSpec, SpatialGrid};
use mfk::harness::compare_at_times;
use mfk::mild::{self, SolverOptions};
use mfk::oracles::{burgers_fd_reference, BurgersFormula, BurgersVariant, FdSettings};
use mfk::{PresetParams, ProblemSpec};

fn main() -> mfk::Result<()> {
    let params = PresetParams::default();
    let problem = ProblemSpec::preset("burgers", &params)?;
    let grid = GridSpec::new(SpatialGrid::new(1, 8.0, 512)?, 1.0, 512)?;
    let (u, report) = mild::solve(&problem, &grid, SolverOptions::default())?;
    println!(
        "{} slabs of width {:.5} (bound {:.5}), ball radius {:.3}, {:.1}s",
        report.slabs, report.tau, report.tau_max, report.ball_radius, report.wall_clock_seconds
    );
    if let Some(w) = &report.tau_warning {
        println!("note: {w}");
    }

    let fd = burgers_fd_reference(problem.initial(), params.nu, &grid, FdSettings::default())?;
    let cmp = compare_at_times(&u, &fd, &[0.25, 0.5, 1.0])?;
    for ((t, l1), linf) in cmp.times.iter().zip(&cmp.l1).zip(&cmp.linf) {
        println!("t = {t:.2}: L1 {l1:.3e}, Linf {linf:.3e} vs finite volumes");
    }

    let formula = BurgersFormula::new(BurgersVariant::ColeHopf);
    let k = grid.level_of(1.0).unwrap();
    for x in [-1.0, 0.0, 0.5, 1.0] {
        let i = grid.spatial.nearest(&[x]).unwrap();
        let exact = formula.eval(
            problem.initial(),
            params.nu,
            1.0,
            grid.spatial.axis_coord(i),
        )?;
        println!("u(1, {x:+.1}) = {:.6}  Cole-Hopf {exact:.6}", u.level(k)[i]);
    }
    Ok(())
}
