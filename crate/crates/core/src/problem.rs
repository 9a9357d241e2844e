//! Problem instances: coefficients `Φ, b₀, b, Λ`, the initial density and the
//! declared bound/Lipschitz constants.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::kernel::{KernelModel, TimeMatrix, TimeVector};

/// `b(t, x, z)` written into the output slice.
pub type DriftFn = dyn Fn(f64, &[f64], f64, &mut [f64]) + Send + Sync;
/// `Λ(t, x, z)`.
pub type GrowthFn = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;

/// Bounded initial probability density `u₀`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialDensity {
    /// Isotropic normal with the given mean and per-axis variance.
    Gaussian { mean: Vec<f64>, var: f64 },
    /// Uniform on the box `[lower, upper]`.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
}

impl InitialDensity {
    pub fn gaussian_1d(mean: f64, var: f64) -> Self {
        Self::Gaussian {
            mean: vec![mean],
            var,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian { mean, .. } => mean.len(),
            Self::Uniform { lower, .. } => lower.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { mean, var } => {
                if mean.is_empty() || !(*var > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "Gaussian u₀ needs a non-empty mean and positive variance, got var = {var}"
                    )));
                }
            }
            Self::Uniform { lower, upper } => {
                if lower.is_empty()
                    || lower.len() != upper.len()
                    || lower.iter().zip(upper).any(|(a, b)| !(a < b))
                {
                    return Err(Error::InvalidParameter(
                        "uniform u₀ needs lower < upper on every axis".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        match self {
            Self::Gaussian { mean, var } => {
                let r2: f64 = x.iter().zip(mean).map(|(a, m)| (a - m).powi(2)).sum();
                (-0.5 * r2 / var).exp() / (2.0 * PI * var).powf(0.5 * mean.len() as f64)
            }
            Self::Uniform { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(v, (a, b))| *v >= *a && *v <= *b);
                if inside {
                    1.0 / lower.iter().zip(upper).map(|(a, b)| b - a).product::<f64>()
                } else {
                    0.0
                }
            }
        }
    }

    /// `‖u₀‖_∞`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::Gaussian { mean, var } => (2.0 * PI * var).powf(-0.5 * mean.len() as f64),
            Self::Uniform { lower, upper } => {
                1.0 / lower.iter().zip(upper).map(|(a, b)| b - a).product::<f64>()
            }
        }
    }

    /// Cumulative distribution function (one-dimensional densities only).
    pub fn cdf_1d(&self, x: f64) -> Result<f64> {
        if self.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: self.dim(),
            });
        }
        Ok(match self {
            Self::Gaussian { mean, var } => 0.5 * (1.0 + erf((x - mean[0]) / (2.0 * var).sqrt())),
            Self::Uniform { lower, upper } => {
                ((x - lower[0]) / (upper[0] - lower[0])).clamp(0.0, 1.0)
            }
        })
    }

    /// Half-width of a centred box holding all but `eps` of the mass per axis.
    pub fn extent(&self, eps: f64) -> f64 {
        match self {
            Self::Gaussian { mean, var } => {
                let z = statrs::distribution::ContinuousCDF::inverse_cdf(
                    &statrs::distribution::Normal::standard(),
                    1.0 - eps / (2.0 * mean.len() as f64),
                );
                mean.iter().fold(0.0f64, |m, v| m.max(v.abs())) + z * var.sqrt()
            }
            Self::Uniform { lower, upper } => lower
                .iter()
                .chain(upper)
                .fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Self::Gaussian { mean, var } => {
                let sd = var.sqrt();
                for (o, m) in out.iter_mut().zip(mean) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = m + sd * z;
                }
            }
            Self::Uniform { lower, upper } => {
                for (o, (a, b)) in out.iter_mut().zip(lower.iter().zip(upper)) {
                    *o = a + (b - a) * rng.random::<f64>();
                }
            }
        }
    }
}

/// Declared uniform bounds and Lipschitz-in-`z` constants of `b` and `Λ`,
/// plus the range `[-z_max, z_max]` on which they are claimed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub m_b: f64,
    pub m_lambda: f64,
    pub l_b: f64,
    pub l_lambda: f64,
    pub z_max: f64,
}

/// Everything needed to define a problem; validated into a [`ProblemSpec`].
#[derive(Clone)]
pub struct ProblemDefinition {
    pub name: String,
    pub dim: usize,
    pub horizon: f64,
    /// `Φ(t)`; the diffusion matrix is `a = ΦΦᵀ`.
    pub diffusion_factor: TimeMatrix,
    pub base_drift: TimeVector,
    pub interaction: Arc<DriftFn>,
    pub growth: Arc<GrowthFn>,
    pub initial: InitialDensity,
    pub constants: ProblemConstants,
}

/// An immutable McKean-Feynman-Kac problem instance.
#[derive(Clone)]
pub struct ProblemSpec {
    def: ProblemDefinition,
    kernel: KernelModel,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.def.name)
            .field("dim", &self.def.dim)
            .field("horizon", &self.def.horizon)
            .field("initial", &self.def.initial)
            .field("constants", &self.def.constants)
            .finish()
    }
}

/// Numeric knobs of the presets.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetParams {
    pub dim: usize,
    pub horizon: f64,
    /// Diffusion `a = ν·I`.
    pub nu: f64,
    /// Growth rate for `exponential_growth` and `logistic_fkpp`.
    pub lambda: f64,
    pub u0_mean: f64,
    pub u0_var: f64,
    /// Overrides the default clamp level of `z`.
    pub z_max: Option<f64>,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            dim: 1,
            horizon: 1.0,
            nu: 1.0,
            lambda: 0.5,
            u0_mean: 0.0,
            u0_var: 0.04,
            z_max: None,
        }
    }
}

pub const PRESET_NAMES: [&str; 4] = ["heat", "exponential_growth", "burgers", "logistic_fkpp"];

impl ProblemSpec {
    pub fn new(def: ProblemDefinition) -> Result<Self> {
        def.initial.validate()?;
        if def.initial.dim() != def.dim {
            return Err(Error::DimensionMismatch {
                expected: def.dim,
                found: def.initial.dim(),
            });
        }
        let c = def.constants;
        if [c.m_b, c.m_lambda, c.l_b, c.l_lambda]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
            || !(c.z_max > 0.0)
        {
            return Err(Error::InvalidParameter(format!(
                "declared constants must be non-negative: {c:?}"
            )));
        }
        let kernel = KernelModel::new(
            def.dim,
            def.horizon,
            def.diffusion_factor.gram(),
            def.base_drift.clone(),
        )?;
        Ok(Self { def, kernel })
    }

    /// One of [`PRESET_NAMES`].
    pub fn preset(name: &str, params: &PresetParams) -> Result<Self> {
        let d = params.dim;
        if d == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(params.nu > 0.0) || !(params.u0_var > 0.0) || !(params.horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "preset needs ν > 0, u₀ variance > 0 and T > 0: {params:?}"
            )));
        }
        let initial = InitialDensity::Gaussian {
            mean: vec![params.u0_mean; d],
            var: params.u0_var,
        };
        let kernel = KernelModel::brownian(d, params.nu, params.horizon)?;
        let c_u = kernel.c_big();
        let sup = initial.sup_norm();
        let lambda = params.lambda;

        let zero_drift: Arc<DriftFn> = Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0));
        let zero_growth: Arc<GrowthFn> = Arc::new(|_, _, _| 0.0);

        let (interaction, growth, constants) = match name {
            "heat" => {
                let z_max = params.z_max.unwrap_or(2.0 * sup * c_u);
                (
                    zero_drift,
                    zero_growth,
                    ProblemConstants {
                        m_b: 0.0,
                        m_lambda: 0.0,
                        l_b: 0.0,
                        l_lambda: 0.0,
                        z_max,
                    },
                )
            }
            "exponential_growth" => {
                let z_max = params
                    .z_max
                    .unwrap_or(2.0 * sup * c_u * (lambda.abs() * params.horizon).exp());
                let growth: Arc<GrowthFn> = Arc::new(move |_, _, _| lambda);
                (
                    zero_drift,
                    growth,
                    ProblemConstants {
                        m_b: 0.0,
                        m_lambda: lambda.abs(),
                        l_b: 0.0,
                        l_lambda: 0.0,
                        z_max,
                    },
                )
            }
            "burgers" => {
                if d != 1 {
                    return Err(Error::InvalidParameter(format!(
                        "burgers preset is one-dimensional, got d = {d}"
                    )));
                }
                let z_max = params.z_max.unwrap_or(2.0 * sup * c_u);
                let drift: Arc<DriftFn> = Arc::new(move |_, _, z, out: &mut [f64]| {
                    out[0] = 0.5 * z.clamp(-z_max, z_max);
                });
                (
                    drift,
                    zero_growth,
                    ProblemConstants {
                        m_b: 0.5 * z_max,
                        m_lambda: 0.0,
                        l_b: 0.5,
                        l_lambda: 0.0,
                        z_max,
                    },
                )
            }
            "logistic_fkpp" => {
                let z_max = params.z_max.unwrap_or(2.0 * sup.max(1.0) * c_u);
                let growth: Arc<GrowthFn> =
                    Arc::new(move |_, _, z| lambda * (1.0 - z.clamp(-z_max, z_max)));
                (
                    zero_drift,
                    growth,
                    ProblemConstants {
                        m_b: 0.0,
                        m_lambda: lambda.abs() * (1.0 + z_max),
                        l_b: 0.0,
                        l_lambda: lambda.abs(),
                        z_max,
                    },
                )
            }
            other => return Err(Error::UnknownPreset(other.to_string())),
        };

        Self::new(ProblemDefinition {
            name: name.to_string(),
            dim: d,
            horizon: params.horizon,
            diffusion_factor: TimeMatrix::scaled_identity(d, params.nu.sqrt()),
            base_drift: TimeVector::zeros(d),
            interaction,
            growth,
            initial,
            constants,
        })
    }

    pub fn name(&self) -> &str {
        &self.def.name
    }

    pub fn dim(&self) -> usize {
        self.def.dim
    }

    pub fn horizon(&self) -> f64 {
        self.def.horizon
    }

    pub fn initial(&self) -> &InitialDensity {
        &self.def.initial
    }

    pub fn constants(&self) -> ProblemConstants {
        self.def.constants
    }

    pub fn diffusion_factor(&self) -> &TimeMatrix {
        &self.def.diffusion_factor
    }

    pub fn base_drift(&self) -> &TimeVector {
        &self.def.base_drift
    }

    /// Fundamental solution of the linear part, with derived `(C_u, c_u)`.
    pub fn kernel(&self) -> &KernelModel {
        &self.kernel
    }

    /// Ellipticity constant `μ` of `a = ΦΦᵀ`.
    pub fn ellipticity(&self) -> f64 {
        self.kernel.ellipticity()
    }

    #[inline]
    pub fn interaction_drift(&self, t: f64, x: &[f64], z: f64, out: &mut [f64]) {
        (self.def.interaction)(t, x, z, out)
    }

    #[inline]
    pub fn growth(&self, t: f64, x: &[f64], z: f64) -> f64 {
        (self.def.growth)(t, x, z)
    }

    /// `½ Σ aᵢⱼ ∂²ᵢⱼφ + Σ b₀ⱼ ∂ⱼφ` at `(t, x)`.
    pub fn apply_generator(&self, phi: &dyn TestFunction, t: f64, x: &[f64]) -> f64 {
        let d = self.def.dim;
        let a = self.kernel.diffusion().at(t);
        let b0 = self.def.base_drift.at(t);
        let mut grad = vec![0.0; d];
        let mut hess = vec![0.0; d * d];
        phi.gradient(x, &mut grad);
        phi.hessian(x, &mut hess);
        let mut out = 0.0;
        for i in 0..d {
            for j in 0..d {
                out += 0.5 * a[(i, j)] * hess[i * d + j];
            }
            out += b0[i] * grad[i];
        }
        out
    }

    /// Samples `(t, x, z₁, z₂)` with `x ∈ [-x_radius, x_radius]^d` and
    /// `z ∈ [-z_max, z_max]`, comparing against the declared constants.
    pub fn check_constants(&self, samples: usize, seed: u64, x_radius: f64) -> ConstantCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.def.dim;
        let c = self.def.constants;
        let mut x = vec![0.0; d];
        let mut b1 = vec![0.0; d];
        let mut b2 = vec![0.0; d];
        let mut check = ConstantCheck::default();
        for _ in 0..samples {
            let t = rng.random::<f64>() * self.def.horizon;
            for xi in x.iter_mut() {
                *xi = x_radius * (2.0 * rng.random::<f64>() - 1.0);
            }
            let z1 = c.z_max * (2.0 * rng.random::<f64>() - 1.0);
            let z2 = c.z_max * (2.0 * rng.random::<f64>() - 1.0);
            self.interaction_drift(t, &x, z1, &mut b1);
            self.interaction_drift(t, &x, z2, &mut b2);
            let l1 = self.growth(t, &x, z1);
            let l2 = self.growth(t, &x, z2);
            let nb1 = DVector::from_column_slice(&b1).norm();
            let db = DVector::from_iterator(d, b1.iter().zip(&b2).map(|(a, b)| a - b)).norm();
            let dz = (z1 - z2).abs();
            check.max_b = check.max_b.max(nb1);
            check.max_lambda = check.max_lambda.max(l1.abs());
            if dz > 0.0 {
                check.max_lip_b = check.max_lip_b.max(db / dz);
                check.max_lip_lambda = check.max_lip_lambda.max((l1 - l2).abs() / dz);
            }
            let slack = |declared: f64| declared * (1.0 + 1e-12) + 1e-15;
            if nb1 > slack(c.m_b)
                || l1.abs() > slack(c.m_lambda)
                || db > slack(c.l_b) * dz
                || (l1 - l2).abs() > slack(c.l_lambda) * dz
            {
                check.violations += 1;
            }
            check.samples += 1;
        }
        check
    }
}

/// Observed maxima from [`ProblemSpec::check_constants`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConstantCheck {
    pub samples: usize,
    pub violations: usize,
    pub max_b: f64,
    pub max_lambda: f64,
    pub max_lip_b: f64,
    pub max_lip_lambda: f64,
}

/// A smooth test function with first and second derivatives.
///
/// The default derivatives are centred finite differences with step
/// [`TestFunction::fd_step`].
pub trait TestFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn fd_step(&self) -> f64 {
        1e-4
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let h = self.fd_step();
        let mut y = x.to_vec();
        for (i, o) in out.iter_mut().enumerate() {
            y[i] = x[i] + h;
            let fp = self.value(&y);
            y[i] = x[i] - h;
            let fm = self.value(&y);
            y[i] = x[i];
            *o = (fp - fm) / (2.0 * h);
        }
    }

    /// Row-major `d × d` Hessian.
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let h = self.fd_step();
        let mut y = x.to_vec();
        let f0 = self.value(x);
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = if i == j {
                    y[i] = x[i] + h;
                    let fp = self.value(&y);
                    y[i] = x[i] - h;
                    let fm = self.value(&y);
                    y[i] = x[i];
                    (fp - 2.0 * f0 + fm) / (h * h)
                } else {
                    let mut corner = |si: f64, sj: f64| {
                        y[i] = x[i] + si * h;
                        y[j] = x[j] + sj * h;
                        let v = self.value(&y);
                        y[i] = x[i];
                        y[j] = x[j];
                        v
                    };
                    (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0))
                        / (4.0 * h * h)
                };
            }
        }
    }
}

/// `φ(x) = exp(−|x − c|²/s²) · (x₁ − c₁)^k` with analytic derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussMonomial {
    pub center: Vec<f64>,
    pub scale: f64,
    pub power: u32,
}

impl GaussMonomial {
    pub fn new(center: Vec<f64>, scale: f64, power: u32) -> Self {
        Self {
            center,
            scale,
            power,
        }
    }

    /// `exp(−x²)·x^k` for `k = 0..count` in dimension `d`.
    pub fn basket(dim: usize, count: u32) -> Vec<GaussMonomial> {
        (0..count)
            .map(|k| Self::new(vec![0.0; dim], 1.0, k))
            .collect()
    }

    fn parts(&self, x: &[f64]) -> (Vec<f64>, f64, f64, f64, f64) {
        let y: Vec<f64> = x.iter().zip(&self.center).map(|(a, c)| a - c).collect();
        let s2 = self.scale * self.scale;
        let g = (-y.iter().map(|v| v * v).sum::<f64>() / s2).exp();
        let k = self.power as i32;
        let p = y[0].powi(k);
        let dp = if k >= 1 {
            k as f64 * y[0].powi(k - 1)
        } else {
            0.0
        };
        let ddp = if k >= 2 {
            (k * (k - 1)) as f64 * y[0].powi(k - 2)
        } else {
            0.0
        };
        (y, g, p, dp, ddp)
    }
}

impl TestFunction for GaussMonomial {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (_, g, p, _, _) = self.parts(x);
        g * p
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let (y, g, p, dp, _) = self.parts(x);
        let s2 = self.scale * self.scale;
        for (i, o) in out.iter_mut().enumerate() {
            let gi = -2.0 * y[i] / s2 * g;
            let pi = if i == 0 { dp } else { 0.0 };
            *o = gi * p + g * pi;
        }
    }

    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let (y, g, p, dp, ddp) = self.parts(x);
        let d = y.len();
        let s2 = self.scale * self.scale;
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                let gij = (4.0 * y[i] * y[j] / (s2 * s2) - 2.0 * delta / s2) * g;
                let gi = -2.0 * y[i] / s2 * g;
                let gj = -2.0 * y[j] / s2 * g;
                let pi = if i == 0 { dp } else { 0.0 };
                let pj = if j == 0 { dp } else { 0.0 };
                let pij = if i == 0 && j == 0 { ddp } else { 0.0 };
                out[i * d + j] = gij * p + gi * pj + gj * pi + g * pij;
            }
        }
    }
}

/// A closure-backed test function differentiated by finite differences.
pub struct FnTestFunction<F> {
    dim: usize,
    f: F,
    step: f64,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnTestFunction<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f, step: 1e-4 }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> TestFunction for FnTestFunction<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn fd_step(&self) -> f64 {
        self.step
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn custom_1d(drift: f64) -> ProblemSpec {
        let zero_drift: Arc<DriftFn> = Arc::new(|_, _, _, out: &mut [f64]| out.fill(0.0));
        ProblemSpec::new(ProblemDefinition {
            name: "custom".into(),
            dim: 1,
            horizon: 1.0,
            diffusion_factor: TimeMatrix::scaled_identity(1, 1.0),
            base_drift: TimeVector::Constant(DVector::from_element(1, drift)),
            interaction: zero_drift,
            growth: Arc::new(|_, _, _| 0.0),
            initial: InitialDensity::gaussian_1d(0.0, 0.04),
            constants: ProblemConstants {
                m_b: 0.0,
                m_lambda: 0.0,
                l_b: 0.0,
                l_lambda: 0.0,
                z_max: 1.0,
            },
        })
        .unwrap()
    }

    #[test]
    fn generator_examples() {
        let p = custom_1d(0.0);
        let sq = FnTestFunction::new(1, |x: &[f64]| x[0] * x[0]);
        assert!((p.apply_generator(&sq, 0.3, &[1.7]) - 1.0).abs() < 1e-6);
        let p = custom_1d(1.0);
        let lin = FnTestFunction::new(1, |x: &[f64]| x[0]);
        assert!((p.apply_generator(&lin, 0.0, &[-2.0]) - 1.0).abs() < 1e-6);

        let p2 = ProblemSpec::preset(
            "heat",
            &PresetParams {
                dim: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let bump = GaussMonomial::new(vec![0.0, 0.0], 1.0, 0);
        assert!((p2.apply_generator(&bump, 0.0, &[0.0, 0.0]) + 2.0).abs() < 1e-14);
    }

    #[test]
    fn analytic_hessian_matches_finite_differences() {
        let f = GaussMonomial::new(vec![0.1, -0.2], 0.8, 3);
        let fd = FnTestFunction::new(2, |x: &[f64]| f.value(x)).with_step(1e-4);
        let x = [0.4, 0.3];
        let (mut h1, mut h2) = (vec![0.0; 4], vec![0.0; 4]);
        f.hessian(&x, &mut h1);
        fd.hessian(&x, &mut h2);
        for (a, b) in h1.iter().zip(&h2) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let (mut g1, mut g2) = (vec![0.0; 2], vec![0.0; 2]);
        f.gradient(&x, &mut g1);
        fd.gradient(&x, &mut g2);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn preset_constants() {
        let heat = ProblemSpec::preset("heat", &PresetParams::default()).unwrap();
        let c = heat.constants();
        assert_eq!((c.m_b, c.m_lambda, c.l_b, c.l_lambda), (0.0, 0.0, 0.0, 0.0));

        let burgers = ProblemSpec::preset("burgers", &PresetParams::default()).unwrap();
        let c = burgers.constants();
        assert!((c.m_b - c.z_max / 2.0).abs() < 1e-15);
        let mut out = [0.0];
        burgers.interaction_drift(0.0, &[0.0], 0.8, &mut out);
        assert_eq!(out[0], 0.4);

        let growth = ProblemSpec::preset("exponential_growth", &PresetParams::default()).unwrap();
        let c = growth.constants();
        assert_eq!((c.m_lambda, c.l_lambda), (0.5, 0.0));
        assert_eq!(growth.growth(0.2, &[3.0], 7.0), 0.5);

        assert!(matches!(
            ProblemSpec::preset("wave", &PresetParams::default()),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn declared_constants_survive_sampling() {
        for name in PRESET_NAMES {
            let p = ProblemSpec::preset(name, &PresetParams::default()).unwrap();
            let check = p.check_constants(10_000, 11, 8.0);
            assert_eq!(check.violations, 0, "{name}: {check:?}");
        }
    }

    #[test]
    fn wrong_constants_are_caught() {
        let p = ProblemSpec::preset("burgers", &PresetParams::default()).unwrap();
        let mut def = p.def.clone();
        def.constants.m_b *= 0.5;
        let bad = ProblemSpec::new(def).unwrap();
        assert!(bad.check_constants(1000, 3, 8.0).violations > 0);
    }

    #[test]
    fn gaussian_u0_facts() {
        let u0 = InitialDensity::gaussian_1d(0.0, 0.04);
        assert!((u0.sup_norm() - 1.994_711_402_007_163_5).abs() < 1e-12);
        assert!((u0.cdf_1d(0.0).unwrap() - 0.5).abs() < 1e-15);
        let two = InitialDensity::Gaussian {
            mean: vec![0.0, 0.0],
            var: 1.0,
        };
        assert!(two.cdf_1d(0.0).is_err());
        let _ = DMatrix::<f64>::identity(1, 1);
    }
}
