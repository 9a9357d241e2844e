//! A user-defined problem: anisotropic 2-d diffusion, a repulsive drift
//! `b = κ·u·x` and logistic-type growth, solved on slabs.

use std::sync::Arc;

use mfk::grid::{GridSpec, SpatialGrid};
use mfk::kernel::{TimeMatrix, TimeVector};
use mfk::mild::{self, SolverOptions};
use mfk::problem::{DriftFn, GrowthFn, InitialDensity, ProblemConstants, ProblemDefinition};
use mfk::ProblemSpec;
use nalgebra::DMatrix;

fn main() -> mfk::Result<()> {
    let z_max = 10.0;
    let kappa = 0.05;
    let radius = 6.0;
    let interaction: Arc<DriftFn> = Arc::new(move |_, x, z, out: &mut [f64]| {
        let z = z.clamp(-z_max, z_max);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = kappa * z * xi.clamp(-radius, radius);
        }
    });
    let growth: Arc<GrowthFn> = Arc::new(move |_, _, z| 0.3 * (1.0 - z.clamp(-z_max, z_max)));
    let problem = ProblemSpec::new(ProblemDefinition {
        name: "anisotropic_logistic".into(),
        dim: 2,
        horizon: 0.5,
        diffusion_factor: TimeMatrix::Constant(DMatrix::from_row_slice(
            2,
            2,
            &[1.0, 0.0, 0.3, 0.6],
        )),
        base_drift: TimeVector::zeros(2),
        interaction,
        growth,
        initial: InitialDensity::Gaussian {
            mean: vec![0.0, 0.0],
            var: 0.1,
        },
        constants: ProblemConstants {
            m_b: kappa * z_max * radius * 2f64.sqrt(),
            m_lambda: 0.3 * (1.0 + z_max),
            l_b: kappa * radius * 2f64.sqrt(),
            l_lambda: 0.3,
            z_max,
        },
    })?;
    let check = problem.check_constants(10_000, 7, radius);
    println!(
        "declared constants violated in {} of {} samples",
        check.violations, check.samples
    );

    let grid = GridSpec::new(SpatialGrid::new(2, radius, 96)?, 0.5, 64)?;
    let (u, report) = mild::solve(&problem, &grid, SolverOptions::default())?;
    println!(
        "{} slabs, converged {}, {:.1}s",
        report.slabs, report.converged, report.wall_clock_seconds
    );
    for k in (0..=64).step_by(16) {
        println!(
            "t = {:.3}: mass {:.6}, sup {:.4}",
            grid.time(k),
            u.mass(k),
            u.level(k).iter().cloned().fold(0.0, f64::max)
        );
    }
    Ok(())
}
