//! Run configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SpatialGrid};
use crate::mild::{SolverOptions, TimeQuadrature, TimeRule};
use crate::particle::{check_step_compatibility, Bandwidth, ParticleConfig};
use crate::problem::{PresetParams, ProblemSpec, PRESET_NAMES};

/// Experiment kinds, named as the CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SolveMild,
    SimulateFrozen,
    SimulateMckean,
    Validate,
    Sweep,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::SolveMild => "solve-mild",
            Self::SimulateFrozen => "simulate-frozen",
            Self::SimulateMckean => "simulate-mckean",
            Self::Validate => "validate",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemSection {
    pub preset: String,
    pub dim: usize,
    pub horizon: f64,
    pub nu: f64,
    pub lambda: f64,
    pub u0_mean: f64,
    pub u0_var: f64,
    pub z_max: Option<f64>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        let p = PresetParams::default();
        Self {
            preset: String::new(),
            dim: p.dim,
            horizon: p.horizon,
            nu: p.nu,
            lambda: p.lambda,
            u0_mean: p.u0_mean,
            u0_var: p.u0_var,
            z_max: p.z_max,
        }
    }
}

impl ProblemSection {
    pub fn params(&self) -> PresetParams {
        PresetParams {
            dim: self.dim,
            horizon: self.horizon,
            nu: self.nu,
            lambda: self.lambda,
            u0_mean: self.u0_mean,
            u0_var: self.u0_var,
            z_max: self.z_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub radius: f64,
    pub nodes: usize,
    pub time_steps: usize,
    /// Slab width; chosen automatically when absent.
    pub tau: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            radius: 8.0,
            nodes: 512,
            time_steps: 64,
            tau: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub time_rule: TimeRule,
    /// Gauss-Legendre nodes per step for time-dependent coefficients.
    pub quadrature_nodes: Option<usize>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            tol: o.tol,
            max_iter: o.max_iter,
            time_rule: o.time_rule,
            quadrature_nodes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleSection {
    pub count: usize,
    /// Defaults to the grid time step.
    pub dt: Option<f64>,
    /// Fixed KDE bandwidth; Silverman's rule when absent.
    pub bandwidth: Option<f64>,
    /// Factor applied to Silverman's bandwidth.
    pub bandwidth_scale: f64,
    pub seed: u64,
    /// Independent seeds `seed, seed+1, ..`.
    pub seeds: usize,
    pub weight_rule: TimeRule,
    /// Particle counts for `sweep`.
    pub counts: Vec<usize>,
    /// Number of `exp(−x²)·x₁^k` test functions, `k = 0..`.
    pub test_functions: u32,
    /// Times for functional comparisons; `T/4, T/2, T` when absent.
    pub times: Option<Vec<f64>>,
}

impl Default for ParticleSection {
    fn default() -> Self {
        Self {
            count: 10_000,
            dt: None,
            bandwidth: None,
            bandwidth_scale: 1.0,
            seed: 0,
            seeds: 1,
            weight_rule: TimeRule::LeftPoint,
            counts: vec![1_000, 10_000, 100_000],
            test_functions: 5,
            times: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    /// Write every `stride`-th time level of field CSVs (the last level is
    /// always written).
    pub stride: usize,
    /// Times at which field tolerances are checked; every level when absent.
    pub times: Option<Vec<f64>>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            stride: 1,
            times: None,
        }
    }
}

/// Declared tolerances. Only declared values are checked, except that
/// `validate` falls back to `l1 = 1e-3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    pub l1: Option<f64>,
    pub linf: Option<f64>,
    /// Bound on `|∫u(t) − e^{λt}|` for presets with constant growth.
    pub mass: Option<f64>,
    pub z_score: f64,
    pub pass_fraction: f64,
    /// Require nonincreasing errors in `sweep`.
    pub monotone: bool,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            l1: None,
            linf: None,
            mass: None,
            z_score: 3.0,
            pass_fraction: 0.95,
            monotone: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overridden by the CLI subcommand.
    pub experiment: Option<Experiment>,
    pub problem: ProblemSection,
    pub grid: GridSection,
    pub solver: SolverSection,
    pub particles: ParticleSection,
    pub output: OutputSection,
    pub tolerances: ToleranceSection,
}

fn invalid(key: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Parses TOML text. Errors carry the line, column and key.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }

    /// Checks every constraint, naming the offending key.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if p.preset.is_empty() {
            return Err(invalid(
                "problem.preset",
                format!("required, one of {PRESET_NAMES:?}"),
            ));
        }
        if !PRESET_NAMES.contains(&p.preset.as_str()) {
            return Err(invalid(
                "problem.preset",
                format!(
                    "unknown preset {:?}, expected one of {PRESET_NAMES:?}",
                    p.preset
                ),
            ));
        }
        if p.dim == 0 {
            return Err(invalid("problem.dim", "must be positive"));
        }
        positive("problem.horizon", p.horizon)?;
        positive("problem.nu", p.nu)?;
        positive("problem.u0_var", p.u0_var)?;
        if let Some(z) = p.z_max {
            positive("problem.z_max", z)?;
        }
        positive("grid.radius", self.grid.radius)?;
        if self.grid.nodes < 2 {
            return Err(invalid("grid.nodes", "need at least 2 nodes per axis"));
        }
        if self.grid.time_steps == 0 {
            return Err(invalid("grid.time_steps", "must be positive"));
        }
        if let Some(tau) = self.grid.tau {
            positive("grid.tau", tau)?;
            let slabs = p.horizon / tau;
            if (slabs - slabs.round()).abs() > 1e-9 * slabs.max(1.0) {
                return Err(invalid(
                    "grid.tau",
                    format!(
                        "τ = {tau} does not divide problem.horizon = {} (N·τ = T needs integer N)",
                        p.horizon
                    ),
                ));
            }
            if !self.grid.time_steps.is_multiple_of(slabs.round() as usize) {
                return Err(invalid(
                    "grid.tau",
                    format!(
                        "{} slabs do not divide grid.time_steps = {}",
                        slabs.round(),
                        self.grid.time_steps
                    ),
                ));
            }
        }
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 {
            return Err(invalid("solver.max_iter", "must be positive"));
        }
        if self.solver.quadrature_nodes == Some(0) {
            return Err(invalid("solver.quadrature_nodes", "must be positive"));
        }
        let q = &self.particles;
        if q.count == 0 {
            return Err(invalid("particles.count", "must be positive"));
        }
        if q.seeds == 0 {
            return Err(invalid("particles.seeds", "must be positive"));
        }
        if let Some(h) = q.bandwidth {
            positive("particles.bandwidth", h)?;
        }
        positive("particles.bandwidth_scale", q.bandwidth_scale)?;
        if q.counts.is_empty() || q.counts.contains(&0) {
            return Err(invalid(
                "particles.counts",
                "need a nonempty list of positive counts",
            ));
        }
        let dt = self.particle_dt();
        positive("particles.dt", dt)?;
        let steps = p.horizon / dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) || steps.round() < 1.0 {
            return Err(invalid(
                "particles.dt",
                format!("Δt = {dt} does not divide problem.horizon = {}", p.horizon),
            ));
        }
        check_step_compatibility(dt, p.horizon / self.grid.time_steps as f64)
            .map_err(|e| invalid("particles.dt", e))?;
        for t in self
            .comparison_times()
            .into_iter()
            .chain(self.output.times.clone().unwrap_or_default())
        {
            if !(0.0..=p.horizon).contains(&t) {
                return Err(invalid(
                    "times",
                    format!("{t} lies outside [0, {}]", p.horizon),
                ));
            }
        }
        if self.output.stride == 0 {
            return Err(invalid("output.stride", "must be positive"));
        }
        for (key, v) in [
            ("tolerances.l1", self.tolerances.l1),
            ("tolerances.linf", self.tolerances.linf),
            ("tolerances.mass", self.tolerances.mass),
        ] {
            if let Some(v) = v {
                positive(key, v)?;
            }
        }
        positive("tolerances.z_score", self.tolerances.z_score)?;
        if !(self.tolerances.pass_fraction > 0.0 && self.tolerances.pass_fraction <= 1.0) {
            return Err(invalid("tolerances.pass_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        ProblemSpec::preset(&self.problem.preset, &self.problem.params())
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.problem.dim, self.grid.radius, self.grid.nodes)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let g = GridSpec::new(
            self.spatial_grid()?,
            self.problem.horizon,
            self.grid.time_steps,
        )?;
        match self.grid.tau {
            Some(tau) => g.with_slab_width(tau),
            None => Ok(g),
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            time_rule: self.solver.time_rule,
            time_quadrature: self
                .solver
                .quadrature_nodes
                .map_or(TimeQuadrature::Auto, TimeQuadrature::SqrtSubstitution),
            ..SolverOptions::default()
        }
    }

    pub fn particle_dt(&self) -> f64 {
        self.particles
            .dt
            .unwrap_or(self.problem.horizon / self.grid.time_steps as f64)
    }

    /// Particle settings for `count` particles and seed offset `seed_index`.
    pub fn particle_config(&self, count: usize, seed_index: usize) -> ParticleConfig {
        let mut c = ParticleConfig::new(
            count,
            self.particle_dt(),
            self.particles.seed.wrapping_add(seed_index as u64),
        );
        c.weight_rule = self.particles.weight_rule;
        c
    }

    pub fn bandwidth(&self) -> Bandwidth {
        match self.particles.bandwidth {
            Some(h) => Bandwidth::Fixed(h),
            None if self.particles.bandwidth_scale == 1.0 => Bandwidth::Silverman,
            None => Bandwidth::ScaledSilverman(self.particles.bandwidth_scale),
        }
    }

    pub fn comparison_times(&self) -> Vec<f64> {
        let t = self.problem.horizon;
        self.particles
            .times
            .clone()
            .unwrap_or_else(|| vec![0.25 * t, 0.5 * t, t])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::from_toml("[problem]\npreset = \"heat\"\n").unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid.nodes, 512);
        assert_eq!(c.particle_dt(), 1.0 / 64.0);
        assert_eq!(c.bandwidth(), Bandwidth::Silverman);
    }

    #[test]
    fn parse_errors_name_the_key_and_line() {
        let err = RunConfig::from_toml("[problem]\npreset = \"heat\"\n\n[grid]\nnodse = 3\n")
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nodse") && msg.contains("line 5"), "{msg}");
        let err = RunConfig::from_toml("[grid]\nnodes = \"many\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn tau_must_divide_the_horizon() {
        let c = RunConfig::from_toml("[problem]\npreset = \"heat\"\n[grid]\ntau = 0.3\n").unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(
            msg.contains("grid.tau") && msg.contains("does not divide"),
            "{msg}"
        );
    }

    #[test]
    fn other_constraints_are_named() {
        let cases = [
            ("[problem]\npreset = \"wave\"\n", "problem.preset"),
            ("[problem]\npreset = \"heat\"\nnu = -1.0\n", "problem.nu"),
            (
                "[problem]\npreset = \"heat\"\n[particles]\ndt = 0.3\n",
                "particles.dt",
            ),
            (
                "[problem]\npreset = \"heat\"\n[particles]\ndt = 0.01171875\n",
                "particles.dt",
            ),
            (
                "[problem]\npreset = \"heat\"\n[tolerances]\npass_fraction = 1.5\n",
                "pass_fraction",
            ),
            ("", "problem.preset"),
        ];
        for (text, key) in cases {
            let msg = RunConfig::from_toml(text)
                .unwrap()
                .validate()
                .unwrap_err()
                .to_string();
            assert!(msg.contains(key), "{text}: {msg}");
        }
    }

    #[test]
    fn round_trip() {
        let mut c = RunConfig::from_toml("[problem]\npreset = \"burgers\"\n").unwrap();
        c.grid.tau = Some(0.25);
        c.experiment = Some(Experiment::Sweep);
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}
