//! Bounded mild solutions by Picard iteration on time slabs.
//!
//! On a slab `[r, r+τ]` the solution is written `u = û₀ + v`, where
//! `û₀(t) = ∫ p(r,x₀,t,·) φ(x₀) dx₀` carries the slab's initial value `φ`
//! and `v` is the fixed point of
//!
//! ```text
//! Π(v)(t,x) = ∫ᵣᵗ ∫ p(s,x₀,t,x) Λ̂(s,x₀,v+û₀) dx₀ ds
//!           + Σⱼ ∫ᵣᵗ ∫ ∂_{x₀,j} p(s,x₀,t,x) b̂ⱼ(s,x₀,v+û₀) dx₀ ds
//! ```
//!
//! with `Λ̂(·,·,w) = Λ(·,·,w)·w` and `b̂(·,·,w) = b(·,·,w)·w`. Slabs are solved in
//! order, each starting from the previous slab's terminal value.

mod operator;
mod sources;
mod weak;

use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};
use crate::kernel::KernelModel;
use crate::problem::ProblemSpec;
use crate::quadrature::trapezoid_weights;
use crate::spectral::Spectral;

use operator::SlabOperator;
pub use operator::{TimeQuadrature, TimeRule};
pub use sources::{FrozenSources, NonlinearSources, SourceTerms};
pub use weak::weak_residual;

/// Starting iterate `v⁽⁰⁾` on every slab.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialIterate {
    #[default]
    Zero,
    /// `v⁽⁰⁾ = c·û₀`.
    ScaledKernelEvolution(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Stop once the slab L¹ distance between successive iterates is ≤ `tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub time_rule: TimeRule,
    pub time_quadrature: TimeQuadrature,
    pub initial_iterate: InitialIterate,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 200,
            time_rule: TimeRule::LeftPoint,
            time_quadrature: TimeQuadrature::Auto,
            initial_iterate: InitialIterate::Zero,
        }
    }
}

/// Bounds and Lipschitz constants of the sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceConstants {
    pub m_b: f64,
    pub m_lambda: f64,
    pub l_b: f64,
    pub l_lambda: f64,
}

/// Largest `τ` with `2√τ (M_Λ τ^{3/2} + 2 d M_b C_u) ≤ 1`, capped at `horizon`.
///
/// The bound is stated for a ball of radius one; for radius `M` both sides
/// scale by `M`, so `ball_radius` does not change the result.
pub fn estimate_slab_tau(
    m_b: f64,
    m_lambda: f64,
    c_u: f64,
    dim: usize,
    ball_radius: f64,
    horizon: f64,
) -> f64 {
    let _ = ball_radius;
    let bound =
        |tau: f64| 2.0 * tau.sqrt() * (m_lambda * tau.powf(1.5) + 2.0 * dim as f64 * m_b * c_u);
    if bound(horizon) <= 1.0 {
        return horizon;
    }
    let (mut lo, mut hi) = (0.0, horizon);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bound(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}

/// Ball radius `max(1, ‖u₀‖_∞ C_u e^{M_Λ T}, ‖u₀‖₁ e^{M_Λ T})`.
pub fn ball_radius(u0_sup: f64, u0_l1: f64, c_u: f64, m_lambda: f64, horizon: f64) -> f64 {
    let growth = (m_lambda * horizon).exp();
    1f64.max(u0_sup * c_u * growth).max(u0_l1 * growth)
}

/// Iteration state on one slab.
#[derive(Debug, Clone)]
pub struct PicardState {
    pub slab: usize,
    /// Global time level of the slab start `r`.
    pub first_level: usize,
    pub start: f64,
    pub width: f64,
    /// `û₀` at the slab levels `r, r+Δt, …, r+τ`.
    pub u_hat: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    /// Slab L¹ distances between successive iterates.
    pub residuals: Vec<f64>,
    pub iterations: usize,
}

impl PicardState {
    /// `u = û₀ + v` at every slab level.
    pub fn solution(&self) -> Vec<Vec<f64>> {
        self.u_hat
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect()
    }
}

/// Monitors collected while iterating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BallMonitor {
    pub max_sup: f64,
    pub max_l1_per_time: f64,
    pub max_slab_l1: f64,
    /// Largest `‖Π(v)‖_∞ / (M √τ)` seen.
    pub empirical_c_bar: f64,
    pub violations: usize,
}

/// Outcome of one slab.
#[derive(Debug, Clone)]
pub struct SlabSolution {
    pub state: PicardState,
    pub ball: BallMonitor,
    /// Iterations `i` where `residual[i+2] > π C² τ · max(residual[..=i])`.
    pub contraction_violations: usize,
}

/// Metadata of the grid a report refers to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub dim: usize,
    pub radius: f64,
    pub nodes_per_axis: usize,
    pub time_steps: usize,
    pub horizon: f64,
}

impl From<&GridSpec> for GridSummary {
    fn from(g: &GridSpec) -> Self {
        Self {
            dim: g.spatial.dim(),
            radius: g.spatial.radius(),
            nodes_per_axis: g.spatial.nodes_per_axis(),
            time_steps: g.time_steps,
            horizon: g.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub converged: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub time_rule: TimeRule,
    pub slabs: usize,
    pub slab_steps: usize,
    pub tau: f64,
    pub tau_max: f64,
    /// Set when the slab width exceeds `tau_max`.
    pub tau_warning: Option<String>,
    pub c_u: f64,
    pub c_small: f64,
    pub constants: SourceConstants,
    pub ball_radius: f64,
    /// `(2 L_Λ M + M_Λ)√τ + d C_u (2 L_b M + M_b)`.
    pub contraction_constant: f64,
    pub contraction_violations: usize,
    pub ball: BallMonitor,
    pub iterations: Vec<usize>,
    pub final_residuals: Vec<f64>,
    pub residual_histories: Vec<Vec<f64>>,
    pub wall_clock_seconds: f64,
    pub grid: GridSummary,
}

impl SolveReport {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# report serialization failed: {e}\n"))
    }
}

/// Picard solver for one set of sources on one grid.
pub struct MildSolver<'a, S: SourceTerms> {
    kernel: &'a KernelModel,
    sources: S,
    grid: GridSpec,
    spectral: Spectral,
    coords: Vec<f64>,
    options: SolverOptions,
    constants: SourceConstants,
    u0: Vec<f64>,
    ball_radius: f64,
    tau_max: f64,
    slab_steps: usize,
    tau_warning: Option<String>,
}

impl<'a, S: SourceTerms> MildSolver<'a, S> {
    /// `u0` holds the initial density at the spatial nodes. The slab width is
    /// taken from `grid` if set, otherwise the widest admissible one.
    pub fn new(
        kernel: &'a KernelModel,
        sources: S,
        u0: Vec<f64>,
        grid: &GridSpec,
        constants: SourceConstants,
        options: SolverOptions,
    ) -> Result<Self> {
        let spatial = &grid.spatial;
        if spatial.dim() != kernel.dim() || sources.dim() != kernel.dim() {
            return Err(Error::DimensionMismatch {
                expected: kernel.dim(),
                found: spatial.dim(),
            });
        }
        if u0.len() != spatial.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: spatial.num_nodes(),
                found: u0.len(),
            });
        }
        if (grid.horizon - kernel.horizon()).abs() > 1e-12 * kernel.horizon()
            && grid.horizon > kernel.horizon()
        {
            return Err(Error::InvalidGrid(format!(
                "grid horizon {} exceeds the kernel horizon {}",
                grid.horizon,
                kernel.horizon()
            )));
        }
        if !(options.tol > 0.0) || options.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "tol and max_iter must be positive".into(),
            ));
        }
        let c_u = kernel.c_big();
        let u0_sup = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let u0_l1 = spatial.l1_norm(&u0);
        let ball = ball_radius(u0_sup, u0_l1, c_u, constants.m_lambda, grid.horizon);
        let tau_max = estimate_slab_tau(
            constants.m_b,
            constants.m_lambda,
            c_u,
            spatial.dim(),
            ball,
            grid.horizon,
        );
        let dt = grid.dt();
        let (slab_steps, tau_warning) = match grid.slab_steps() {
            Some(s) => {
                let tau = s as f64 * dt;
                let warn = (tau > tau_max * (1.0 + 1e-12))
                    .then(|| format!("slab width {tau} exceeds the admissible width {tau_max}"));
                (s, warn)
            }
            None => auto_slab_steps(grid.time_steps, dt, tau_max),
        };
        let mut coords = vec![0.0; spatial.num_nodes() * spatial.dim()];
        for (i, c) in coords.chunks_mut(spatial.dim()).enumerate() {
            spatial.coords_into(i, c);
        }
        Ok(Self {
            kernel,
            sources,
            grid: grid.clone(),
            spectral: Spectral::new(spatial),
            coords,
            options,
            constants,
            u0,
            ball_radius: ball,
            tau_max,
            slab_steps,
            tau_warning,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn slab_steps(&self) -> usize {
        self.slab_steps
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    pub fn ball_radius(&self) -> f64 {
        self.ball_radius
    }

    pub fn contraction_constant(&self) -> f64 {
        let c = self.constants;
        let m = self.ball_radius;
        let tau = self.slab_steps as f64 * self.grid.dt();
        (2.0 * c.l_lambda * m + c.m_lambda) * tau.sqrt()
            + self.grid.spatial.dim() as f64 * self.kernel.c_big() * (2.0 * c.l_b * m + c.m_b)
    }

    fn operator(&self) -> SlabOperator<'_> {
        SlabOperator::new(
            &self.spectral,
            self.kernel,
            self.grid.dt(),
            self.options.time_rule,
            self.options.time_quadrature,
        )
    }

    /// Sets up slab `slab` with initial value `phi` and the configured `v⁽⁰⁾`.
    pub fn initial_state(&self, slab: usize, phi: &[f64]) -> Result<PicardState> {
        let m = self.slab_steps;
        let first_level = slab * m;
        if first_level + m > self.grid.time_steps {
            return Err(Error::InvalidParameter(format!(
                "slab {slab} lies beyond the time grid"
            )));
        }
        let dt = self.grid.dt();
        let r = self.grid.time(first_level);
        let mut u_hat = Vec::with_capacity(m + 1);
        u_hat.push(phi.to_vec());
        let rest: Vec<Vec<f64>> = (1..=m)
            .into_par_iter()
            .map(|j| {
                self.kernel
                    .convolve_initial_with(&self.spectral, phi, r, r + j as f64 * dt)
            })
            .collect::<Result<_>>()?;
        u_hat.extend(rest);
        let v = match self.options.initial_iterate {
            InitialIterate::Zero => vec![vec![0.0; phi.len()]; m + 1],
            InitialIterate::ScaledKernelEvolution(c) => u_hat
                .iter()
                .map(|l| l.iter().map(|x| c * x).collect())
                .collect(),
        };
        Ok(PicardState {
            slab,
            first_level,
            start: r,
            width: m as f64 * dt,
            u_hat,
            v,
            residuals: Vec::new(),
            iterations: 0,
        })
    }

    fn transformed_sources(
        &self,
        state: &PicardState,
        op: &SlabOperator<'_>,
    ) -> Vec<Vec<Complex64>> {
        let m = state.v.len() - 1;
        let d = self.grid.spatial.dim();
        let upto = if op.uses_right_level() { m } else { m - 1 };
        (0..=m)
            .into_par_iter()
            .map(|j| {
                let n = self.spectral.len();
                if j > upto {
                    return vec![Complex64::new(0.0, 0.0); n];
                }
                let level = state.first_level + j;
                let t = self.grid.time(level);
                let mut growth = vec![0.0; n];
                let mut drift = vec![vec![0.0; n]; d];
                let mut b = vec![0.0; d];
                for node in 0..n {
                    let w = state.u_hat[j][node] + state.v[j][node];
                    let x = &self.coords[node * d..(node + 1) * d];
                    let lam = self.sources.coefficients(level, t, node, x, w, &mut b);
                    growth[node] = lam * w;
                    for a in 0..d {
                        drift[a][node] = b[a] * w;
                    }
                }
                let mut x_hat = self.spectral.forward(&growth);
                for (a, field) in drift.iter().enumerate() {
                    if field.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let spec = self.spectral.forward(field);
                    for (q, (xq, sq)) in x_hat.iter_mut().zip(&spec).enumerate() {
                        *xq += self.spectral.gradient_factor(q, a) * sq;
                    }
                }
                x_hat
            })
            .collect()
    }

    /// `Π(v)` at every level of the slab.
    pub fn picard_map(&self, state: &PicardState) -> Vec<Vec<f64>> {
        let op = self.operator();
        let sources = self.transformed_sources(state, &op);
        op.integrate(state.start, &sources)
    }

    /// Slab L¹ norm `∫ ‖f(s)‖_{L¹} ds` over the slab levels (trapezoid in time).
    pub fn slab_l1(&self, levels: &[Vec<f64>]) -> f64 {
        let w = trapezoid_weights(levels.len(), self.grid.dt());
        levels
            .iter()
            .zip(&w)
            .map(|(l, wt)| wt * self.grid.spatial.l1_norm(l))
            .sum()
    }

    /// Iterates `Π` on slab `slab` from `phi` until the residual drops below `tol`.
    pub fn solve_slab(&self, slab: usize, phi: &[f64]) -> Result<SlabSolution> {
        let state = self.initial_state(slab, phi)?;
        self.iterate(state)
    }

    /// Iterates from a prepared state.
    pub fn iterate(&self, mut state: PicardState) -> Result<SlabSolution> {
        let op = self.operator();
        let spatial = &self.grid.spatial;
        let m_ball = self.ball_radius;
        let tau = state.width;
        let mut ball = BallMonitor::default();
        loop {
            let sources = self.transformed_sources(&state, &op);
            let next = op.integrate(state.start, &sources);
            let diff: Vec<Vec<f64>> = next
                .iter()
                .zip(&state.v)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect();
            let residual = self.slab_l1(&diff);

            let sup = next.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
            let l1_max = next
                .iter()
                .map(|l| spatial.l1_norm(l))
                .fold(0.0f64, f64::max);
            let slab_l1 = self.slab_l1(&next);
            ball.max_sup = ball.max_sup.max(sup);
            ball.max_l1_per_time = ball.max_l1_per_time.max(l1_max);
            ball.max_slab_l1 = ball.max_slab_l1.max(slab_l1);
            if tau > 0.0 {
                ball.empirical_c_bar = ball.empirical_c_bar.max(sup / (m_ball * tau.sqrt()));
            }
            if sup > m_ball || l1_max > m_ball || slab_l1 > m_ball {
                ball.violations += 1;
            }

            state.v = next;
            state.residuals.push(residual);
            state.iterations += 1;
            if !residual.is_finite() {
                break;
            }
            if residual <= self.options.tol {
                let contraction_violations = self.contraction_violations(&state.residuals, tau);
                return Ok(SlabSolution {
                    state,
                    ball,
                    contraction_violations,
                });
            }
            if state.iterations >= self.options.max_iter {
                break;
            }
        }
        Err(Error::NonConvergence {
            slab: state.slab,
            iterations: state.iterations,
            residual: *state.residuals.last().unwrap_or(&f64::NAN),
            tol: self.options.tol,
            history: state.residuals,
        })
    }

    fn contraction_violations(&self, residuals: &[f64], tau: f64) -> usize {
        let c = self.contraction_constant();
        let factor = std::f64::consts::PI * c * c * tau;
        let mut running_max = 0.0f64;
        let mut count = 0;
        for i in 0..residuals.len() {
            running_max = running_max.max(residuals[i]);
            if let Some(&later) = residuals.get(i + 2) {
                if later > factor * running_max + 1e-14 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Solves all slabs in order and glues them into one field.
    pub fn solve(&self) -> Result<(Field, SolveReport)> {
        let clock = Instant::now();
        let m = self.slab_steps;
        let slabs = self.grid.time_steps / m;
        let mut field = Field::zeros(self.grid.clone());
        field.set_level(0, &self.u0);
        let mut report = SolveReport {
            converged: true,
            tol: self.options.tol,
            max_iter: self.options.max_iter,
            time_rule: self.options.time_rule,
            slabs,
            slab_steps: m,
            tau: m as f64 * self.grid.dt(),
            tau_max: self.tau_max,
            tau_warning: self.tau_warning.clone(),
            c_u: self.kernel.c_big(),
            c_small: self.kernel.bounds().c_u,
            constants: self.constants,
            ball_radius: self.ball_radius,
            contraction_constant: self.contraction_constant(),
            contraction_violations: 0,
            ball: BallMonitor::default(),
            iterations: Vec::with_capacity(slabs),
            final_residuals: Vec::with_capacity(slabs),
            residual_histories: Vec::with_capacity(slabs),
            wall_clock_seconds: 0.0,
            grid: GridSummary::from(&self.grid),
        };
        for k in 0..slabs {
            let phi = field.level(k * m).to_vec();
            let sol = self.solve_slab(k, &phi)?;
            for (j, level) in sol.state.solution().iter().enumerate().skip(1) {
                field.set_level(k * m + j, level);
            }
            let b = &mut report.ball;
            b.max_sup = b.max_sup.max(sol.ball.max_sup);
            b.max_l1_per_time = b.max_l1_per_time.max(sol.ball.max_l1_per_time);
            b.max_slab_l1 = b.max_slab_l1.max(sol.ball.max_slab_l1);
            b.empirical_c_bar = b.empirical_c_bar.max(sol.ball.empirical_c_bar);
            b.violations += sol.ball.violations;
            report.contraction_violations += sol.contraction_violations;
            report.iterations.push(sol.state.iterations);
            report
                .final_residuals
                .push(*sol.state.residuals.last().unwrap_or(&0.0));
            report.residual_histories.push(sol.state.residuals);
        }
        report.converged = report
            .final_residuals
            .iter()
            .all(|r| *r <= self.options.tol);
        report.wall_clock_seconds = clock.elapsed().as_secs_f64();
        Ok((field, report))
    }
}

/// Smallest slab count `N` dividing the step count with `T/N ≤ τ_max`.
fn auto_slab_steps(time_steps: usize, dt: f64, tau_max: f64) -> (usize, Option<String>) {
    for steps in (1..=time_steps).rev() {
        if time_steps.is_multiple_of(steps) && steps as f64 * dt <= tau_max * (1.0 + 1e-12) {
            return (steps, None);
        }
    }
    (
        1,
        Some(format!(
            "time step {dt} exceeds the admissible slab width {tau_max}; using one step per slab"
        )),
    )
}

fn problem_constants(problem: &ProblemSpec) -> SourceConstants {
    let c = problem.constants();
    SourceConstants {
        m_b: c.m_b,
        m_lambda: c.m_lambda,
        l_b: c.l_b,
        l_lambda: c.l_lambda,
    }
}

/// Solver for a problem's nonlinear coefficients.
pub fn solver<'a>(
    problem: &'a ProblemSpec,
    grid: &GridSpec,
    options: SolverOptions,
) -> Result<MildSolver<'a, NonlinearSources<'a>>> {
    let u0 = grid.spatial.sample(|x| problem.initial().density(x));
    MildSolver::new(
        problem.kernel(),
        NonlinearSources(problem),
        u0,
        grid,
        problem_constants(problem),
        options,
    )
}

/// The mild solution of `problem` on `grid`, with its run report.
pub fn solve(
    problem: &ProblemSpec,
    grid: &GridSpec,
    options: SolverOptions,
) -> Result<(Field, SolveReport)> {
    solver(problem, grid, options)?.solve()
}

/// One application of `Π` for the problem's coefficients.
pub fn picard_map(
    state: &PicardState,
    problem: &ProblemSpec,
    grid: &GridSpec,
    options: SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    Ok(solver(problem, grid, options)?.picard_map(state))
}

/// Solves the linear equation with frozen coefficients `b̂(t,x)` (one field per
/// axis) and `Λ̂(t,x)` from the nodal initial density `u0`.
pub fn solve_linearized(
    kernel: &KernelModel,
    drift: &[Field],
    growth: &Field,
    u0: &[f64],
    grid: &GridSpec,
    options: SolverOptions,
) -> Result<(Field, SolveReport)> {
    if !growth.grid().same_mesh(grid) {
        return Err(Error::GridMismatch(
            "frozen coefficients must live on the solve grid".into(),
        ));
    }
    let sources = FrozenSources::new(drift, growth)?;
    let constants = SourceConstants {
        m_b: sources.drift_bound(),
        m_lambda: sources.growth_bound(),
        l_b: 0.0,
        l_lambda: 0.0,
    };
    MildSolver::new(kernel, sources, u0.to_vec(), grid, constants, options)?.solve()
}

/// `b(t,x,u(t,x))` per axis and `Λ(t,x,u(t,x))` sampled on the field's grid.
pub fn freeze_coefficients(problem: &ProblemSpec, u: &Field) -> (Vec<Field>, Field) {
    let grid = u.grid().clone();
    let d = grid.spatial.dim();
    let n = grid.spatial.num_nodes();
    let mut drift: Vec<Field> = (0..d).map(|_| Field::zeros(grid.clone())).collect();
    let mut growth = Field::zeros(grid.clone());
    let mut x = vec![0.0; d];
    let mut b = vec![0.0; d];
    for k in 0..grid.levels() {
        let t = grid.time(k);
        for node in 0..n {
            grid.spatial.coords_into(node, &mut x);
            let z = u.level(k)[node];
            problem.interaction_drift(t, &x, z, &mut b);
            growth.level_mut(k)[node] = problem.growth(t, &x, z);
            for a in 0..d {
                drift[a].level_mut(k)[node] = b[a];
            }
        }
    }
    (drift, growth)
}

/// Slab L¹ distance between two fields for each slab of `slab_steps` levels.
pub fn slab_distances(a: &Field, b: &Field, slab_steps: usize) -> Result<Vec<f64>> {
    let diff = a.difference(b)?;
    let grid = diff.grid();
    if slab_steps == 0 || grid.time_steps % slab_steps != 0 {
        return Err(Error::InvalidGrid(format!(
            "slab of {slab_steps} steps does not divide {} steps",
            grid.time_steps
        )));
    }
    let w = trapezoid_weights(slab_steps + 1, grid.dt());
    Ok((0..grid.time_steps / slab_steps)
        .map(|k| {
            (0..=slab_steps)
                .map(|j| w[j] * diff.l1_at(k * slab_steps + j))
                .sum()
        })
        .collect())
}
