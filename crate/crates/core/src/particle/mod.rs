//! Euler-Maruyama particles with Feynman-Kac log-weights.
//!
//! Each particle `i` draws from its own ChaCha8 stream `i` of the master seed,
//! so ensembles are reproducible bit for bit whatever the thread count.

mod kde;

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{fmt_num, Field, GridSpec, SpatialGrid};
use crate::mild::TimeRule;
use crate::problem::ProblemSpec;

pub use kde::{effective_sample_size, weighted_kde, Bandwidth, DensityEstimate};

/// Which time levels an ensemble keeps.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Recording {
    #[default]
    All,
    /// Level 0 and the listed levels.
    Levels(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    pub count: usize,
    pub dt: f64,
    pub seed: u64,
    /// Quadrature of `∫Λ ds` along each path.
    pub weight_rule: TimeRule,
    pub recording: Recording,
}

impl ParticleConfig {
    pub fn new(count: usize, dt: f64, seed: u64) -> Self {
        Self {
            count,
            dt,
            seed,
            weight_rule: TimeRule::LeftPoint,
            recording: Recording::All,
        }
    }

    /// Keeps only level 0 and the levels at `times`.
    pub fn recording_times(mut self, times: &[f64]) -> Self {
        let levels = times
            .iter()
            .map(|t| (t / self.dt).round() as usize)
            .collect();
        self.recording = Recording::Levels(levels);
        self
    }
}

/// Positions `Y[i][k]` and log-weights `L[i][k]` at the recorded levels.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    count: usize,
    dim: usize,
    dt: f64,
    steps: usize,
    seed: u64,
    levels: Vec<usize>,
    positions: Vec<Vec<f64>>,
    log_weights: Vec<Vec<f64>>,
}

impl ParticleEnsemble {
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream index used by particle `i`.
    pub fn stream(&self, i: usize) -> u64 {
        i as u64
    }

    pub fn recorded_levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    fn slot(&self, level: usize) -> Result<usize> {
        self.levels
            .binary_search(&level)
            .map_err(|_| Error::MissingLevel(self.time(level)))
    }

    /// Level index of time `t`, if it was recorded.
    pub fn level_at(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if !(k >= 0.0) || (k * self.dt - t).abs() > 1e-9 * self.dt.max(t.abs()) {
            return Err(Error::MissingLevel(t));
        }
        let k = k as usize;
        self.slot(k).map(|_| k)
    }

    /// `count × dim` positions, row-major.
    pub fn positions(&self, level: usize) -> Result<&[f64]> {
        Ok(&self.positions[self.slot(level)?])
    }

    pub fn log_weights(&self, level: usize) -> Result<&[f64]> {
        Ok(&self.log_weights[self.slot(level)?])
    }

    pub fn weights(&self, level: usize) -> Result<Vec<f64>> {
        Ok(self.log_weights(level)?.iter().map(|l| l.exp()).collect())
    }

    /// `(1/N) Σ exp(L[i][k])`.
    pub fn mean_weight(&self, level: usize) -> Result<f64> {
        Ok(self.weights(level)?.iter().sum::<f64>() / self.count as f64)
    }

    /// Per recorded level: `t`, mean weight, effective sample size and the
    /// weighted mean of each coordinate.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("t,mean_weight,ess");
        for a in 0..self.dim {
            let _ = write!(s, ",mean_x{}", a + 1);
        }
        s.push('\n');
        for (slot, &level) in self.levels.iter().enumerate() {
            let w: Vec<f64> = self.log_weights[slot].iter().map(|l| l.exp()).collect();
            let total: f64 = w.iter().sum();
            let _ = write!(
                s,
                "{},{},{}",
                fmt_num(self.time(level)),
                fmt_num(total / self.count as f64),
                fmt_num(effective_sample_size(&w))
            );
            for a in 0..self.dim {
                let m: f64 = w
                    .iter()
                    .enumerate()
                    .map(|(i, wi)| wi * self.positions[slot][i * self.dim + a])
                    .sum::<f64>()
                    / total;
                let _ = write!(s, ",{}", fmt_num(m));
            }
            s.push('\n');
        }
        s
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.summary_csv()).map_err(|e| Error::io(path, e))
    }
}

struct Walker {
    pos: Vec<f64>,
    log_weight: f64,
    rng: ChaCha8Rng,
}

/// Coefficients frozen at one time level, shared by all particles.
struct StepCoefficients {
    t: f64,
    diffusion: DMatrix<f64>,
    base_drift: DVector<f64>,
}

impl StepCoefficients {
    fn at(problem: &ProblemSpec, t: f64) -> Self {
        Self {
            t,
            diffusion: problem.diffusion_factor().at(t),
            base_drift: problem.base_drift().at(t),
        }
    }
}

/// Advances one walker by `dt`. `lookup(x)` is `u` at the current level,
/// `lookup_next(x)` at the next one (used only by the trapezoid weight rule).
#[allow(clippy::too_many_arguments)]
fn advance(
    problem: &ProblemSpec,
    walker: &mut Walker,
    now: &StepCoefficients,
    next_t: f64,
    dt: f64,
    rule: TimeRule,
    lookup: &(dyn Fn(&[f64]) -> f64 + Sync),
    lookup_next: &(dyn Fn(&[f64]) -> f64 + Sync),
    scratch: &mut [f64],
) {
    let z = lookup(&walker.pos);
    problem.interaction_drift(now.t, &walker.pos, z, scratch);
    let growth_now = problem.growth(now.t, &walker.pos, z);
    let sq = dt.sqrt();
    let noise: Vec<f64> = (0..now.diffusion.ncols())
        .map(|_| StandardNormal.sample(&mut walker.rng))
        .collect();
    for (a, (pos, b)) in walker.pos.iter_mut().zip(scratch.iter()).enumerate() {
        let diff: f64 = noise
            .iter()
            .enumerate()
            .map(|(c, n)| now.diffusion[(a, c)] * n)
            .sum();
        *pos += (now.base_drift[a] + b) * dt + sq * diff;
    }
    walker.log_weight += match rule {
        TimeRule::LeftPoint => growth_now * dt,
        TimeRule::Trapezoid => {
            let z_next = lookup_next(&walker.pos);
            0.5 * (growth_now + problem.growth(next_t, &walker.pos, z_next)) * dt
        }
    };
}

fn validate(problem: &ProblemSpec, config: &ParticleConfig, horizon: f64) -> Result<usize> {
    if config.count == 0 {
        return Err(Error::InvalidParameter("need at least one particle".into()));
    }
    if !(config.dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Δt must be positive, got {}",
            config.dt
        )));
    }
    let steps = (horizon / config.dt).round();
    if steps < 1.0 || (steps * config.dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidParameter(format!(
            "Δt = {} does not divide the horizon {horizon}",
            config.dt
        )));
    }
    let _ = problem;
    Ok(steps as usize)
}

fn recorded_levels(recording: &Recording, steps: usize) -> Result<Vec<usize>> {
    let mut levels = match recording {
        Recording::All => (0..=steps).collect(),
        Recording::Levels(l) => {
            let mut v = l.clone();
            v.push(0);
            v
        }
    };
    levels.sort_unstable();
    levels.dedup();
    if let Some(&last) = levels.last() {
        if last > steps {
            return Err(Error::InvalidParameter(format!(
                "recorded level {last} beyond {steps} steps"
            )));
        }
    }
    Ok(levels)
}

fn spawn(problem: &ProblemSpec, config: &ParticleConfig) -> Vec<Walker> {
    let d = problem.dim();
    (0..config.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let mut pos = vec![0.0; d];
            problem.initial().sample(&mut rng, &mut pos);
            Walker {
                pos,
                log_weight: 0.0,
                rng,
            }
        })
        .collect()
}

struct Recorder {
    levels: Vec<usize>,
    positions: Vec<Vec<f64>>,
    log_weights: Vec<Vec<f64>>,
}

impl Recorder {
    fn new(levels: Vec<usize>) -> Self {
        Self {
            levels,
            positions: Vec::new(),
            log_weights: Vec::new(),
        }
    }

    fn offer(&mut self, level: usize, walkers: &[Walker]) {
        if self.levels.binary_search(&level).is_ok() {
            self.positions
                .push(walkers.iter().flat_map(|w| w.pos.iter().copied()).collect());
            self.log_weights
                .push(walkers.iter().map(|w| w.log_weight).collect());
        }
    }

    fn finish(
        self,
        problem: &ProblemSpec,
        config: &ParticleConfig,
        steps: usize,
    ) -> ParticleEnsemble {
        ParticleEnsemble {
            count: config.count,
            dim: problem.dim(),
            dt: config.dt,
            steps,
            seed: config.seed,
            levels: self.levels,
            positions: self.positions,
            log_weights: self.log_weights,
        }
    }
}

/// Field level to read at particle time `t`: the left level of the field's
/// time grid.
fn field_level(grid: &GridSpec, t: f64) -> usize {
    (((t / grid.dt()) + 1e-9).floor() as usize).min(grid.time_steps)
}

/// Checks that one of `Δt/field_dt`, `field_dt/Δt` is an integer.
pub fn check_step_compatibility(dt: f64, field_dt: f64) -> Result<()> {
    let fits = |a: f64, b: f64| {
        let r = a / b;
        r >= 1.0 - 1e-9 && (r - r.round()).abs() <= 1e-9 * r
    };
    if fits(dt, field_dt) || fits(field_dt, dt) {
        Ok(())
    } else {
        Err(Error::IncompatibleTimeStep { dt, field_dt })
    }
}

/// Simulates the SDE with `u` frozen to `field` (nearest node in space, left
/// level in time, zero outside the box).
pub fn simulate_frozen(
    field: &Field,
    problem: &ProblemSpec,
    config: &ParticleConfig,
) -> Result<ParticleEnsemble> {
    let grid = field.grid();
    if grid.spatial.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: grid.spatial.dim(),
        });
    }
    check_step_compatibility(config.dt, grid.dt())?;
    let steps = validate(problem, config, grid.horizon)?;
    let mut recorder = Recorder::new(recorded_levels(&config.recording, steps)?);
    let mut walkers = spawn(problem, config);
    recorder.offer(0, &walkers);
    for k in 0..steps {
        let t = k as f64 * config.dt;
        let t_next = (k + 1) as f64 * config.dt;
        let now = StepCoefficients::at(problem, t);
        let level = field_level(grid, t);
        let level_next = field_level(grid, t_next);
        let lookup = |x: &[f64]| field.lookup(level, x);
        let lookup_next = |x: &[f64]| field.lookup(level_next, x);
        walkers.par_iter_mut().for_each(|w| {
            let mut scratch = vec![0.0; problem.dim()];
            advance(
                problem,
                w,
                &now,
                t_next,
                config.dt,
                config.weight_rule,
                &lookup,
                &lookup_next,
                &mut scratch,
            );
        });
        recorder.offer(k + 1, &walkers);
    }
    Ok(recorder.finish(problem, config, steps))
}

/// `(1/N) Σ φ(Y[i]) exp(L[i])` at time `t` and its standard error.
pub fn weighted_functional(
    ensemble: &ParticleEnsemble,
    phi: impl Fn(&[f64]) -> f64 + Sync,
    t: f64,
) -> Result<(f64, f64)> {
    let level = ensemble.level_at(t)?;
    let pos = ensemble.positions(level)?;
    let logw = ensemble.log_weights(level)?;
    let d = ensemble.dim();
    let values: Vec<f64> = (0..ensemble.count())
        .into_par_iter()
        .map(|i| phi(&pos[i * d..(i + 1) * d]) * logw[i].exp())
        .collect();
    Ok(mean_and_standard_error(&values))
}

/// Mean and standard error; identical samples give an error of exactly zero.
pub fn mean_and_standard_error(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let pivot = values[0];
    let shift_mean = values.iter().map(|v| v - pivot).sum::<f64>() / n as f64;
    let mean = pivot + shift_mean;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values
        .iter()
        .map(|v| (v - pivot - shift_mean).powi(2))
        .sum();
    (mean, (ss / (n - 1) as f64 / n as f64).sqrt())
}

/// Weighted KDE of the ensemble at time `t` on `grid`.
pub fn density_estimate(
    ensemble: &ParticleEnsemble,
    t: f64,
    bandwidth: Bandwidth,
    grid: &SpatialGrid,
) -> Result<DensityEstimate> {
    if grid.dim() != ensemble.dim() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.dim(),
            found: grid.dim(),
        });
    }
    let level = ensemble.level_at(t)?;
    let pos = ensemble.positions(level)?;
    let w = ensemble.weights(level)?;
    let h = bandwidth.resolve(pos, &w, ensemble.dim())?;
    Ok(DensityEstimate {
        level,
        time: ensemble.time(level),
        bandwidth: h,
        grid: grid.clone(),
        values: weighted_kde(grid, pos, &w, h),
    })
}

/// Self-consistent mode: `u(t_k,·)` is the weighted KDE of the ensemble at
/// level `k` (with `u(0,·) = u₀`) and feeds the step to `k+1`.
///
/// Returns the ensemble and the reconstructed field on `spatial` with time
/// step `Δt`.
pub fn solve_selfconsistent(
    problem: &ProblemSpec,
    spatial: &SpatialGrid,
    config: &ParticleConfig,
    bandwidth: Bandwidth,
) -> Result<(ParticleEnsemble, Field)> {
    if spatial.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: spatial.dim(),
        });
    }
    let steps = validate(problem, config, problem.horizon())?;
    let grid = GridSpec::new(spatial.clone(), problem.horizon(), steps)?;
    let mut field = Field::zeros(grid);
    field.set_level(0, &spatial.sample(|x| problem.initial().density(x)));
    let mut recorder = Recorder::new(recorded_levels(&config.recording, steps)?);
    let mut walkers = spawn(problem, config);
    recorder.offer(0, &walkers);
    let d = problem.dim();
    let estimate = |walkers: &[Walker]| -> Result<Vec<f64>> {
        let pos: Vec<f64> = walkers.iter().flat_map(|w| w.pos.iter().copied()).collect();
        let w: Vec<f64> = walkers.iter().map(|w| w.log_weight.exp()).collect();
        let h = bandwidth.resolve(&pos, &w, d)?;
        Ok(weighted_kde(spatial, &pos, &w, h))
    };
    for k in 0..steps {
        let t = k as f64 * config.dt;
        let t_next = (k + 1) as f64 * config.dt;
        let now = StepCoefficients::at(problem, t);
        let current = field.level(k).to_vec();
        let lookup = |x: &[f64]| spatial.nearest(x).map_or(0.0, |i| current[i]);
        // The next level is not known before the step; the trapezoid weight
        // rule uses the current estimate there.
        let lookup_next = lookup;
        walkers.par_iter_mut().for_each(|w| {
            let mut scratch = vec![0.0; d];
            advance(
                problem,
                w,
                &now,
                t_next,
                config.dt,
                config.weight_rule,
                &lookup,
                &lookup_next,
                &mut scratch,
            );
        });
        let next = estimate(&walkers)?;
        field.set_level(k + 1, &next);
        recorder.offer(k + 1, &walkers);
    }
    Ok((recorder.finish(problem, config, steps), field))
}
