//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::Instant;

use mfk::grid::{Field, GridSpec, SpatialGrid};
use mfk::harness::{compare_at_times, functional_battery, median, particle_sweep, RunConfig};
use mfk::kernel::{KernelModel, TimeMatrix, TimeVector};
use mfk::mild::{
    self, slab_distances, weak_residual, InitialIterate, SolveReport, SolverOptions, TimeRule,
};
use mfk::oracles::{burgers_fd_reference, heat_oracle, FdSettings};
use mfk::particle::ParticleConfig;
use mfk::problem::GaussMonomial;
use mfk::quadrature::{beta_half_half, LegendreRule};
use mfk::{PresetParams, ProblemSpec};
use nalgebra::{DMatrix, DVector};

const TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// The Burgers solve shared by several criteria.
struct Burgers {
    problem: ProblemSpec,
    grid: GridSpec,
    u: Field,
    report: SolveReport,
    seconds: f64,
}

fn burgers_grid(time_steps: usize) -> GridSpec {
    GridSpec::new(SpatialGrid::new(1, 8.0, 512).unwrap(), 1.0, time_steps).unwrap()
}

fn options() -> SolverOptions {
    SolverOptions {
        tol: TOL,
        ..SolverOptions::default()
    }
}

fn burgers() -> Burgers {
    let problem = ProblemSpec::preset("burgers", &PresetParams::default()).unwrap();
    let grid = burgers_grid(512);
    let clock = Instant::now();
    let (u, report) = mild::solve(&problem, &grid, options()).unwrap();
    Burgers {
        problem,
        grid,
        u,
        report,
        seconds: clock.elapsed().as_secs_f64(),
    }
}

fn heat_exactness() -> Outcome {
    let params = PresetParams::default();
    let problem = ProblemSpec::preset("heat", &params).unwrap();
    let grid = GridSpec::new(SpatialGrid::new(1, 8.0, 512).unwrap(), 1.0, 64).unwrap();
    let clock = Instant::now();
    let (u, _) = mild::solve(&problem, &grid, options()).unwrap();
    let seconds = clock.elapsed().as_secs_f64();
    let worst = (0..grid.levels())
        .map(|k| {
            let t = grid.time(k);
            let err: Vec<f64> = u
                .level(k)
                .iter()
                .zip(grid.spatial.axis_coords())
                .map(|(v, x)| {
                    (v - heat_oracle(params.u0_mean, params.u0_var, params.nu, t, x)).abs()
                })
                .collect();
            grid.spatial.integrate(&err)
        })
        .fold(0.0, f64::max);
    outcome(
        worst <= 1e-3 && seconds <= 30.0,
        format!("max per-time L1 error {worst:.3e} (limit 1e-3), {seconds:.2}s (limit 30s)"),
    )
}

fn mass_laws() -> Outcome {
    let grid = GridSpec::new(SpatialGrid::new(1, 8.0, 512).unwrap(), 1.0, 64).unwrap();
    let trapezoid = SolverOptions {
        time_rule: TimeRule::Trapezoid,
        ..options()
    };
    let heat = ProblemSpec::preset("heat", &PresetParams::default()).unwrap();
    let (u, _) = mild::solve(&heat, &grid, trapezoid.clone()).unwrap();
    let heat_err = (0..grid.levels())
        .map(|k| (u.mass(k) - 1.0).abs())
        .fold(0.0, f64::max);
    let growth = ProblemSpec::preset("exponential_growth", &PresetParams::default()).unwrap();
    let (g, _) = mild::solve(&growth, &grid, trapezoid).unwrap();
    let growth_err = (g.mass(64) - 0.5f64.exp()).abs();
    outcome(
        heat_err <= 1e-3 && growth_err <= 1e-3,
        format!("Λ=0: max |mass-1| {heat_err:.3e}; Λ=0.5: |mass(1)-e^0.5| {growth_err:.3e} (limit 1e-3, trapezoid rule)"),
    )
}

fn burgers_cross_validation(b: &Burgers) -> Outcome {
    let clock = Instant::now();
    let fd =
        burgers_fd_reference(b.problem.initial(), 1.0, &b.grid, FdSettings::default()).unwrap();
    let cmp = compare_at_times(&b.u, &fd, &[0.25, 0.5, 1.0]).unwrap();
    let seconds = b.seconds + clock.elapsed().as_secs_f64();
    let worst = cmp.l1.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1e-2 && seconds <= 300.0,
        format!(
            "L1 vs finite volumes at t=0.25,0.5,1: {:.3e}, {:.3e}, {:.3e} (limit 1e-2), {seconds:.2}s (limit 300s)",
            cmp.l1[0], cmp.l1[1], cmp.l1[2]
        ),
    )
}

fn fixed_point_uniqueness(b: &Burgers) -> Outcome {
    let perturbed = SolverOptions {
        initial_iterate: InitialIterate::ScaledKernelEvolution(0.5),
        ..options()
    };
    let (w, _) = mild::solve(&b.problem, &b.grid, perturbed).unwrap();
    let worst = slab_distances(&b.u, &w, b.report.slab_steps)
        .unwrap()
        .into_iter()
        .fold(0.0, f64::max);
    outcome(
        worst <= 2.0 * TOL,
        format!(
            "max slab L1 distance between v0=0 and v0=0.5·û0 runs {worst:.3e} (limit {:.0e})",
            2.0 * TOL
        ),
    )
}

fn slab_gluing(b: &Burgers) -> Outcome {
    let solve = |tau: f64| {
        let grid = burgers_grid(512).with_slab_width(tau).unwrap();
        mild::solve(&b.problem, &grid, options()).unwrap().0
    };
    let coarse = solve(1.0 / 256.0);
    let fine = solve(1.0 / 512.0);
    let diff = coarse.difference(&fine).unwrap();
    let worst = (0..diff.grid().levels())
        .map(|k| diff.l1_at(k))
        .fold(0.0, f64::max);
    outcome(
        worst <= 2.0 * TOL,
        format!(
            "sup_t L1 distance between τ=1/256 and τ=1/512 {worst:.3e} (limit {:.0e})",
            2.0 * TOL
        ),
    )
}

fn ball_preservation(b: &Burgers) -> Outcome {
    let m = b.report.ball_radius;
    let ball = b.report.ball;
    outcome(
        ball.violations == 0
            && ball.max_sup <= m
            && ball.max_l1_per_time <= m
            && ball.max_slab_l1 <= m,
        format!(
            "M = {m:.4}; max sup {:.4}, max L1 {:.4}, max slab L1 {:.4e}; {} violations",
            ball.max_sup, ball.max_l1_per_time, ball.max_slab_l1, ball.violations
        ),
    )
}

fn kernel_suite() -> Outcome {
    let brownian = KernelModel::brownian(1, 1.0, 1.0).unwrap();
    let varying = KernelModel::new(
        2,
        1.0,
        TimeMatrix::varying(|t| {
            DMatrix::from_row_slice(2, 2, &[1.0 + 0.5 * t, 0.2, 0.2, 0.8 + 0.3 * t * t])
        }),
        TimeVector::varying(|t| DVector::from_vec(vec![0.3 * t, -0.2])),
    )
    .unwrap();
    let kernels = [&brownian, &varying];

    let mut norm_err: f64 = 0.0;
    for k in kernels {
        let d = k.dim();
        let grid = SpatialGrid::new(d, 8.0, if d == 1 { 1024 } else { 256 }).unwrap();
        for (s, t) in [(0.0, 0.05), (0.2, 0.7), (0.0, 1.0)] {
            let x0 = vec![0.3; d];
            norm_err = norm_err.max((k.mass_over_box(&grid, s, &x0, t).unwrap() - 1.0).abs());
        }
    }

    let mut ck: f64 = 0.0;
    for k in kernels {
        let d = k.dim();
        let x0 = vec![0.1; d];
        let y: Vec<f64> = (0..d).map(|j| 0.4 - 0.3 * j as f64).collect();
        for s in [0.0, 0.1, 0.2] {
            for t in [0.35, 0.45, 0.55] {
                for r in [0.7, 0.85, 1.0] {
                    ck = ck.max(
                        k.chapman_kolmogorov_residual(s, t, r, &x0, &y, 201)
                            .unwrap(),
                    );
                }
            }
        }
    }

    let mut ratio: f64 = 0.0;
    for (i, k) in kernels.iter().enumerate() {
        let check = k.verify_bounds(10_000, i as u64);
        ratio = ratio.max(check.worst_ratio_p).max(check.worst_ratio_grad);
    }

    let rule = LegendreRule::new(32);
    let beta = [1e-3, 0.25, 1.0, 7.5]
        .iter()
        .map(|&delta| (beta_half_half(&rule, delta) - std::f64::consts::PI).abs())
        .fold(0.0, f64::max);

    outcome(
        norm_err <= 1e-8 && ck <= 1e-7 && ratio <= 1.0 && beta <= 1e-6,
        format!(
            "normalization {norm_err:.2e} (1e-8), Chapman-Kolmogorov {ck:.2e} (1e-7), bound ratio {ratio:.6} (1), Beta identity {beta:.2e} (1e-6)"
        ),
    )
}

fn representation_frozen(b: &Burgers) -> Outcome {
    let clock = Instant::now();
    let base = ParticleConfig::new(100_000, 1.0 / 256.0, 0);
    let seeds: Vec<u64> = (1000..1020).collect();
    let functions = GaussMonomial::basket(1, 5);
    let (scores, _) = functional_battery(
        &b.u,
        &b.problem,
        &base,
        &seeds,
        &functions,
        &[0.25, 0.5, 1.0],
    )
    .unwrap();
    let seconds = clock.elapsed().as_secs_f64();
    let within = scores.iter().filter(|z| z.z.abs() <= 3.0).count();
    let fraction = within as f64 / scores.len() as f64;
    outcome(
        fraction >= 0.95 && seconds <= 600.0,
        format!(
            "{within}/{} functionals within 3 SE ({:.1}%, need 95%), {seconds:.1}s (limit 600s)",
            scores.len(),
            100.0 * fraction
        ),
    )
}

fn linearized_uniqueness(b: &Burgers) -> Outcome {
    let (drift, growth) = mild::freeze_coefficients(&b.problem, &b.u);
    let (lin, _) = mild::solve_linearized(
        b.problem.kernel(),
        &drift,
        &growth,
        b.u.level(0),
        &b.grid,
        options(),
    )
    .unwrap();
    let worst = slab_distances(&b.u, &lin, b.report.slab_steps)
        .unwrap()
        .into_iter()
        .fold(0.0, f64::max);
    outcome(
        worst <= 2.0 * TOL,
        format!(
            "max slab L1 distance to the nonlinear solution {worst:.3e} (limit {:.0e})",
            2.0 * TOL
        ),
    )
}

fn weak_mild(b: &Burgers) -> Outcome {
    let mut bumped = b.u.clone();
    for k in 1..b.grid.levels() {
        for (i, v) in bumped.level_mut(k).iter_mut().enumerate() {
            let x = b.grid.spatial.axis_coord(i);
            *v += 0.1 * (-(x - 0.5) * (x - 0.5) / 0.5).exp();
        }
    }
    let mut worst: f64 = 0.0;
    let mut min_ratio = f64::INFINITY;
    for phi in GaussMonomial::basket(1, 5) {
        for t in [0.25, 0.5, 1.0] {
            let r = weak_residual(&b.u, &phi, t, &b.problem).unwrap();
            let rb = weak_residual(&bumped, &phi, t, &b.problem).unwrap();
            worst = worst.max(r);
            min_ratio = min_ratio.min(rb / r);
        }
    }
    outcome(
        worst <= 5e-3 && min_ratio >= 10.0,
        format!("max weak residual {worst:.3e} (limit 5e-3), smallest inflation under a 0.1 bump {min_ratio:.1}x (need 10x)"),
    )
}

fn mckean_trend(b: &Burgers) -> Outcome {
    let mut config = RunConfig::from_toml("[problem]\npreset = \"burgers\"\n").unwrap();
    config.particles.dt = Some(1.0 / 256.0);
    let seeds: Vec<u64> = (0..5).collect();
    let rows =
        particle_sweep(&b.problem, &b.u, &config, &[1_000, 10_000, 100_000], &seeds).unwrap();
    let medians: Vec<f64> = rows.iter().map(|r| r.median).collect();
    let monotone = medians.windows(2).all(|w| w[1] <= w[0]);
    debug_assert_eq!(median(&rows[0].errors), rows[0].median);
    outcome(
        monotone,
        format!(
            "median L1 at T for N=1e3,1e4,1e5: {:.3e}, {:.3e}, {:.3e} (nonincreasing: {monotone})",
            medians[0], medians[1], medians[2]
        ),
    )
}

fn main() {
    let b = burgers();
    let criteria: Vec<Criterion> = vec![
        ("1 heat exactness", Box::new(heat_exactness)),
        ("2 mass laws", Box::new(mass_laws)),
        (
            "3 Burgers vs finite volumes",
            Box::new(|| burgers_cross_validation(&b)),
        ),
        (
            "4 fixed-point uniqueness",
            Box::new(|| fixed_point_uniqueness(&b)),
        ),
        ("5 slab gluing", Box::new(|| slab_gluing(&b))),
        ("6 ball preservation", Box::new(|| ball_preservation(&b))),
        ("7 kernel suite", Box::new(kernel_suite)),
        (
            "8 frozen-field representation",
            Box::new(|| representation_frozen(&b)),
        ),
        (
            "9 linearized uniqueness",
            Box::new(|| linearized_uniqueness(&b)),
        ),
        ("10 weak-mild equivalence", Box::new(|| weak_mild(&b))),
        (
            "11 McKean self-consistency trend",
            Box::new(|| mckean_trend(&b)),
        ),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
