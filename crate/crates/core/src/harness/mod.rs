//! Configuration-driven experiment runner behind the `mfk` binary.
//!
//! Each experiment writes CSV fields and TOML reports into the output
//! directory and returns a [`ComparisonReport`] whose checks decide the exit
//! status. CSV output is deterministic: the same configuration reproduces it
//! byte for byte at any thread count.

mod compare;
mod config;

use std::path::{Path, PathBuf};

use log::info;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::mild::{self, SolveReport};
use crate::oracles::{burgers_fd_reference, heat_oracle_nd, FdSettings};
use crate::particle::{self, ParticleConfig, ParticleEnsemble};
use crate::problem::{GaussMonomial, ProblemSpec, TestFunction};

pub use compare::{
    compare_at_times, compare_fields, level_distance, Check, ComparisonReport, ZScore,
};
pub use config::{
    Experiment, GridSection, OutputSection, ParticleSection, ProblemSection, RunConfig,
    SolverSection, ToleranceSection,
};

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "MFK_THREADS";

/// Sizes the global rayon pool. `None` keeps rayon's default.
pub fn init_threads(threads: Option<usize>) -> Result<()> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(Error::Config("threads: must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("threads: {e}")))
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub experiment: Experiment,
    pub report: ComparisonReport,
    pub solve_report: Option<SolveReport>,
    pub artifacts: Vec<PathBuf>,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.report.pass()
    }
}

/// 0 when every check passed, 1 when a tolerance failed, 2 on error.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(o) if o.pass() => 0,
        Ok(_) => 1,
        Err(_) => 2,
    }
}

/// Loads, validates and runs a configuration file. `experiment` and `seed`
/// override the file's values; `out` overrides `output.dir`.
pub fn run_file(
    path: &Path,
    experiment: Option<Experiment>,
    out: Option<&Path>,
    seed: Option<u64>,
) -> Result<RunOutcome> {
    let mut config = RunConfig::load(path)?;
    if experiment.is_some() {
        config.experiment = experiment;
    }
    if let Some(dir) = out {
        config.output.dir = dir.to_path_buf();
    }
    if let Some(s) = seed {
        config.particles.seed = s;
    }
    run(&config)
}

/// Runs the configured experiment and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<RunOutcome> {
    config.validate()?;
    let experiment = config.experiment.ok_or_else(|| {
        Error::Config("experiment: not set in the file or on the command line".into())
    })?;
    let mut out = Output::new(&config.output.dir)?;
    out.write("config.toml", config.to_toml())?;
    info!(
        "{} with preset {}",
        experiment.name(),
        config.problem.preset
    );
    let problem = config.problem_spec()?;
    let (report, solve_report) = match experiment {
        Experiment::SolveMild => solve_mild(config, &problem, &mut out)?,
        Experiment::Validate => validate(config, &problem, &mut out)?,
        Experiment::SimulateFrozen => simulate_frozen(config, &problem, &mut out)?,
        Experiment::SimulateMckean => simulate_mckean(config, &problem, &mut out)?,
        Experiment::Sweep => sweep(config, &problem, &mut out)?,
    };
    out.write("comparison.toml", report.to_toml())?;
    info!(
        "{}: {}",
        experiment.name(),
        if report.pass() { "pass" } else { "FAIL" }
    );
    Ok(RunOutcome {
        experiment,
        report,
        solve_report,
        artifacts: out.files,
    })
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: String) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }

    fn field(&mut self, name: &str, field: &Field, stride: usize) -> Result<()> {
        let last = field.grid().time_steps;
        let mut levels: Vec<usize> = (0..=last).step_by(stride).collect();
        if levels.last() != Some(&last) {
            levels.push(last);
        }
        self.write(name, field.to_csv_levels(&levels))
    }
}

/// Growth rate when `Λ` is a known constant.
fn constant_growth(problem: &ProblemSpec, config: &RunConfig) -> Option<f64> {
    match problem.name() {
        "heat" | "burgers" => Some(0.0),
        "exponential_growth" => Some(config.problem.lambda),
        _ => None,
    }
}

/// Worst `|∫u(t) − e^{λt}|` over the listed levels.
fn mass_error(field: &Field, lambda: f64) -> f64 {
    (0..field.grid().levels())
        .map(|k| (field.mass(k) - (lambda * field.grid().time(k)).exp()).abs())
        .fold(0.0, f64::max)
}

fn mild_solution(
    config: &RunConfig,
    problem: &ProblemSpec,
    out: &mut Output,
) -> Result<(Field, SolveReport)> {
    let (u, report) = mild::solve(problem, &config.grid_spec()?, config.solver_options())?;
    info!(
        "mild solve: {} slabs, at most {} iterations per slab, {:.2}s",
        report.slabs,
        report.iterations.iter().max().copied().unwrap_or(0),
        report.wall_clock_seconds
    );
    out.field("u.csv", &u, config.output.stride)?;
    out.write("solve_report.toml", report.to_toml())?;
    Ok((u, report))
}

fn mild_checks(
    config: &RunConfig,
    problem: &ProblemSpec,
    u: &Field,
    solve: &SolveReport,
    report: &mut ComparisonReport,
) {
    report.push(Check::flag("converged", solve.converged));
    report.push(Check::at_most(
        "ball_violations",
        solve.ball.violations as f64,
        0.0,
    ));
    if let (Some(limit), Some(lambda)) = (config.tolerances.mass, constant_growth(problem, config))
    {
        report.push(Check::at_most("mass", mass_error(u, lambda), limit));
    }
}

fn solve_mild(
    config: &RunConfig,
    problem: &ProblemSpec,
    out: &mut Output,
) -> Result<(ComparisonReport, Option<SolveReport>)> {
    let (u, solve) = mild_solution(config, problem, out)?;
    let mut report = ComparisonReport::default();
    mild_checks(config, problem, &u, &solve, &mut report);
    Ok((report, Some(solve)))
}

/// Closed-form or finite-volume reference for presets that have one.
pub fn reference_field(
    problem: &ProblemSpec,
    config: &RunConfig,
    grid: &GridSpec,
) -> Result<Field> {
    let p = &config.problem;
    let mean = vec![p.u0_mean; p.dim];
    match problem.name() {
        "heat" => Ok(Field::from_fn(grid.clone(), |t, x| {
            heat_oracle_nd(&mean, p.u0_var, p.nu, t, x)
        })),
        "exponential_growth" => Ok(Field::from_fn(grid.clone(), |t, x| {
            (p.lambda * t).exp() * heat_oracle_nd(&mean, p.u0_var, p.nu, t, x)
        })),
        "burgers" => burgers_fd_reference(problem.initial(), p.nu, grid, FdSettings::default()),
        other => Err(Error::InvalidParameter(format!(
            "no reference solution for preset {other:?}"
        ))),
    }
}

fn validate(
    config: &RunConfig,
    problem: &ProblemSpec,
    out: &mut Output,
) -> Result<(ComparisonReport, Option<SolveReport>)> {
    let (u, solve) = mild_solution(config, problem, out)?;
    let reference = reference_field(problem, config, u.grid())?;
    out.field("reference.csv", &reference, config.output.stride)?;
    let mut report = compare_fields(&u, &reference)?;
    let times = config.output.times.clone().unwrap_or_default();
    report.check_l1(config.tolerances.l1.unwrap_or(1e-3), &times);
    if let Some(limit) = config.tolerances.linf {
        report.check_linf(limit, &times);
    }
    mild_checks(config, problem, &u, &solve, &mut report);
    out.write("comparison.csv", report.to_csv())?;
    Ok((report, Some(solve)))
}

/// Largest `|L[i][k]| / (M_Λ t_k)` over the recorded levels; at most 1 when
/// the weights respect `e^{±M_Λ t}`.
pub fn weight_bound_ratio(ensemble: &ParticleEnsemble, m_lambda: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &k in ensemble.recorded_levels() {
        let bound = m_lambda * ensemble.time(k);
        for l in ensemble.log_weights(k)? {
            let r = if bound > 0.0 {
                l.abs() / bound
            } else if *l == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// `∫φ u(t)` on the grid for each function and time.
pub fn quadrature_references(
    field: &Field,
    functions: &[GaussMonomial],
    times: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let spatial = &field.grid().spatial;
    let phis: Vec<Vec<f64>> = functions
        .iter()
        .map(|f| spatial.sample(|x| f.value(x)))
        .collect();
    functions
        .iter()
        .enumerate()
        .map(|(j, _)| {
            times
                .iter()
                .map(|&t| {
                    let k = field.grid().level_of(t).ok_or(Error::MissingLevel(t))?;
                    let prod: Vec<f64> = phis[j]
                        .iter()
                        .zip(field.level(k))
                        .map(|(a, b)| a * b)
                        .collect();
                    Ok(spatial.integrate(&prod))
                })
                .collect()
        })
        .collect()
}

/// Weighted functionals of frozen-field ensembles, one ensemble per seed,
/// compared with grid quadrature of `field`. Also returns the worst weight
/// bound ratio seen.
pub fn functional_battery(
    field: &Field,
    problem: &ProblemSpec,
    base: &ParticleConfig,
    seeds: &[u64],
    functions: &[GaussMonomial],
    times: &[f64],
) -> Result<(Vec<ZScore>, f64)> {
    let refs = quadrature_references(field, functions, times)?;
    let mut scores = Vec::with_capacity(seeds.len() * functions.len() * times.len());
    let mut worst_ratio: f64 = 0.0;
    for &seed in seeds {
        let mut cfg = base.clone();
        cfg.seed = seed;
        let cfg = cfg.recording_times(times);
        let ens = particle::simulate_frozen(field, problem, &cfg)?;
        worst_ratio = worst_ratio.max(weight_bound_ratio(&ens, problem.constants().m_lambda)?);
        for (j, f) in functions.iter().enumerate() {
            for (i, &t) in times.iter().enumerate() {
                let (est, se) = particle::weighted_functional(&ens, |x| f.value(x), t)?;
                scores.push(ZScore::new(
                    format!("gauss_x^{}", f.power),
                    seed,
                    t,
                    est,
                    se,
                    refs[j][i],
                ));
            }
        }
    }
    Ok((scores, worst_ratio))
}

fn seed_list(config: &RunConfig) -> Vec<u64> {
    (0..config.particles.seeds)
        .map(|i| config.particles.seed.wrapping_add(i as u64))
        .collect()
}

fn simulate_frozen(
    config: &RunConfig,
    problem: &ProblemSpec,
    out: &mut Output,
) -> Result<(ComparisonReport, Option<SolveReport>)> {
    let (u, solve) = mild_solution(config, problem, out)?;
    let functions = GaussMonomial::basket(problem.dim(), config.particles.test_functions);
    let times = config.comparison_times();
    let base = config.particle_config(config.particles.count, 0);
    let seeds = seed_list(config);
    let (scores, ratio) = functional_battery(&u, problem, &base, &seeds, &functions, &times)?;

    // artifacts from the first seed
    let ens = particle::simulate_frozen(&u, problem, &base)?;
    out.write("ensemble.csv", ens.summary_csv())?;
    let density = particle::density_estimate(
        &ens,
        problem.horizon(),
        config.bandwidth(),
        &u.grid().spatial,
    )?;
    out.write("density.csv", density.to_csv())?;

    let mut report = ComparisonReport {
        z_scores: scores,
        ..Default::default()
    };
    let fraction = report.z_pass_fraction(config.tolerances.z_score);
    report.push(Check::flag("converged", solve.converged));
    report.push(Check::at_least(
        "z_pass_fraction",
        fraction,
        config.tolerances.pass_fraction,
    ));
    report.push(Check::at_most("weight_bound_ratio", ratio, 1.0 + 1e-12));
    out.write("functionals.csv", report.z_scores_csv())?;
    Ok((report, Some(solve)))
}

fn simulate_mckean(
    config: &RunConfig,
    problem: &ProblemSpec,
    out: &mut Output,
) -> Result<(ComparisonReport, Option<SolveReport>)> {
    let (u, solve) = mild_solution(config, problem, out)?;
    let cfg = config.particle_config(config.particles.count, 0);
    let (ens, field) =
        particle::solve_selfconsistent(problem, &u.grid().spatial, &cfg, config.bandwidth())?;
    out.field("particle_u.csv", &field, config.output.stride)?;
    out.write("ensemble.csv", ens.summary_csv())?;
    let times = config
        .output
        .times
        .clone()
        .unwrap_or_else(|| config.comparison_times());
    let mut report = compare_at_times(&field, &u, &times)?;
    if let Some(limit) = config.tolerances.l1 {
        report.check_l1(limit, &[]);
    }
    if let Some(limit) = config.tolerances.linf {
        report.check_linf(limit, &[]);
    }
    if let (Some(limit), Some(lambda)) = (config.tolerances.mass, constant_growth(problem, config))
    {
        report.push(Check::at_most(
            "particle_mass",
            mass_error(&field, lambda),
            limit,
        ));
    }
    report.push(Check::at_most(
        "weight_bound_ratio",
        weight_bound_ratio(&ens, problem.constants().m_lambda)?,
        1.0 + 1e-12,
    ));
    out.write("comparison.csv", report.to_csv())?;
    Ok((report, Some(solve)))
}

/// Median of a nonempty list.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One row of a particle-count sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub count: usize,
    pub errors: Vec<f64>,
    pub median: f64,
}

/// L¹ distance at `T` between self-consistent particle fields and
/// `reference`, for each count and seed.
pub fn particle_sweep(
    problem: &ProblemSpec,
    reference: &Field,
    config: &RunConfig,
    counts: &[usize],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    let spatial = &reference.grid().spatial;
    let last = reference.grid().time_steps;
    counts
        .iter()
        .map(|&count| {
            let errors = seeds
                .iter()
                .map(|&seed| {
                    let mut cfg = config.particle_config(count, 0);
                    cfg.seed = seed;
                    cfg.recording = particle::Recording::Levels(vec![]);
                    let (_, field) =
                        particle::solve_selfconsistent(problem, spatial, &cfg, config.bandwidth())?;
                    let (l1, _) = level_distance(&field, field.grid().time_steps, reference, last)?;
                    info!("sweep N = {count}, seed {seed}: L1 = {l1:.3e}");
                    Ok(l1)
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepRow {
                count,
                median: median(&errors),
                errors,
            })
        })
        .collect()
}

/// True when the medians never increase along the sweep.
pub fn is_nonincreasing(rows: &[SweepRow]) -> bool {
    rows.windows(2).all(|w| w[1].median <= w[0].median)
}

fn sweep(
    config: &RunConfig,
    problem: &ProblemSpec,
    out: &mut Output,
) -> Result<(ComparisonReport, Option<SolveReport>)> {
    let (u, solve) = mild_solution(config, problem, out)?;
    let seeds = seed_list(config);
    let rows = particle_sweep(problem, &u, config, &config.particles.counts, &seeds)?;
    let mut csv = String::from("count,median_l1");
    for s in &seeds {
        csv.push_str(&format!(",l1_seed_{s}"));
    }
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!("{},{}", r.count, crate::grid::fmt_num(r.median)));
        for e in &r.errors {
            csv.push(',');
            csv.push_str(&crate::grid::fmt_num(*e));
        }
        csv.push('\n');
    }
    let monotone = is_nonincreasing(&rows);
    csv.push_str(&format!("# monotone_nonincreasing,{monotone}\n"));
    out.write("sweep.csv", csv)?;
    let mut report = ComparisonReport::default();
    report.push(Check::flag("converged", solve.converged));
    if config.tolerances.monotone {
        report.push(Check::flag("monotone_nonincreasing", monotone));
    }
    if let (Some(limit), Some(last)) = (config.tolerances.l1, rows.last()) {
        report.push(Check::at_most("l1_at_largest_count", last.median, limit));
    }
    Ok((report, Some(solve)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heat_config(dir: &Path) -> RunConfig {
        let mut c = RunConfig::from_toml(
            "[problem]\npreset = \"heat\"\n[grid]\nnodes = 256\ntime_steps = 16\n",
        )
        .unwrap();
        c.output.dir = dir.to_path_buf();
        c
    }

    #[test]
    fn validate_heat_passes() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = heat_config(dir.path());
        c.experiment = Some(Experiment::Validate);
        c.tolerances.mass = Some(1e-3);
        let outcome = run(&c).unwrap();
        assert!(outcome.pass(), "{:?}", outcome.report.checks);
        assert_eq!(exit_code(&Ok(outcome)), 0);
        let csv = std::fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
        assert!(csv.starts_with("t,l1,linf\n"));
        assert_eq!(csv.lines().count(), 18);
    }

    #[test]
    fn failing_tolerance_gives_exit_one() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = heat_config(dir.path());
        c.experiment = Some(Experiment::Validate);
        c.grid.nodes = 16;
        c.grid.radius = 2.0;
        c.tolerances.l1 = Some(1e-12);
        let result = run(&c);
        assert_eq!(exit_code(&result), 1);
    }

    #[test]
    fn invalid_config_gives_exit_two() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = heat_config(dir.path());
        c.experiment = Some(Experiment::SolveMild);
        c.grid.tau = Some(0.3);
        let result = run(&c);
        assert_eq!(exit_code(&result), 2);
        assert!(result.unwrap_err().to_string().contains("grid.tau"));
    }

    #[test]
    fn missing_experiment_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(run(&heat_config(dir.path())).is_err());
    }

    #[test]
    fn median_and_monotone() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let row = |m| SweepRow {
            count: 1,
            errors: vec![m],
            median: m,
        };
        assert!(is_nonincreasing(&[row(3.0), row(2.0), row(2.0)]));
        assert!(!is_nonincreasing(&[row(3.0), row(4.0)]));
    }
}
