//! Fundamental solution of the linear Fokker-Planck equation
//! `∂ₜp = ½ Σ ∂²ᵢⱼ(aᵢⱼ p) − Σ ∂ⱼ(b₀ⱼ p)` for space-independent `a(t)`, `b₀(t)`.
//!
//! With such coefficients the fundamental solution is the Gaussian density
//!
//! ```text
//! p(s,x₀,t,x) = N(x; x₀ + ∫ₛᵗ b₀(r)dr, ∫ₛᵗ a(r)dr)
//! ```
//!
//! together with the constants `(C_u, c_u)` of the Gaussian bounds
//! `p ≤ C_u q` and `|∂ₓ₀p| ≤ C_u q/√(t−s)`, where `q` is taken as the
//! normalized isotropic Gaussian with variance `(t−s)/(2c_u)` per axis.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::quadrature::LegendreRule;
use crate::spectral::Spectral;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

type MatrixFn = dyn Fn(f64) -> DMatrix<f64> + Send + Sync;
type VectorFn = dyn Fn(f64) -> DVector<f64> + Send + Sync;

/// Matrix-valued coefficient of time.
#[derive(Clone)]
pub enum TimeMatrix {
    Constant(DMatrix<f64>),
    Varying(Arc<MatrixFn>),
}

impl std::fmt::Debug for TimeMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(m) => f.debug_tuple("Constant").field(m).finish(),
            Self::Varying(_) => f.write_str("Varying(..)"),
        }
    }
}

impl TimeMatrix {
    pub fn varying(f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Self::Varying(Arc::new(f))
    }

    /// `c·I` in dimension `d`.
    pub fn scaled_identity(d: usize, c: f64) -> Self {
        Self::Constant(DMatrix::identity(d, d) * c)
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        match self {
            Self::Constant(m) => m.clone(),
            Self::Varying(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }

    /// `∫ₛᵗ A(r) dr`.
    pub fn integral(&self, s: f64, t: f64) -> DMatrix<f64> {
        match self {
            Self::Constant(m) => m * (t - s),
            Self::Varying(f) => {
                let rule = coefficient_rule();
                let mut acc: Option<DMatrix<f64>> = None;
                for (r, w) in rule.mapped(s, t) {
                    let term = f(r) * w;
                    acc = Some(match acc {
                        Some(a) => a + term,
                        None => term,
                    });
                }
                acc.expect("quadrature rule has nodes")
            }
        }
    }

    /// `A(t) A(t)ᵀ`.
    pub fn gram(&self) -> TimeMatrix {
        match self {
            Self::Constant(m) => Self::Constant(m * m.transpose()),
            Self::Varying(f) => {
                let f = Arc::clone(f);
                Self::varying(move |t| {
                    let m = f(t);
                    &m * m.transpose()
                })
            }
        }
    }
}

/// Vector-valued coefficient of time.
#[derive(Clone)]
pub enum TimeVector {
    Constant(DVector<f64>),
    Varying(Arc<VectorFn>),
}

impl std::fmt::Debug for TimeVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            Self::Varying(_) => f.write_str("Varying(..)"),
        }
    }
}

impl TimeVector {
    pub fn varying(f: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self::Varying(Arc::new(f))
    }

    pub fn zeros(d: usize) -> Self {
        Self::Constant(DVector::zeros(d))
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        match self {
            Self::Constant(v) => v.clone(),
            Self::Varying(f) => f(t),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Self::Constant(_))
    }

    pub fn integral(&self, s: f64, t: f64) -> DVector<f64> {
        match self {
            Self::Constant(v) => v * (t - s),
            Self::Varying(f) => {
                let rule = coefficient_rule();
                let mut acc: Option<DVector<f64>> = None;
                for (r, w) in rule.mapped(s, t) {
                    let term = f(r) * w;
                    acc = Some(match acc {
                        Some(a) => a + term,
                        None => term,
                    });
                }
                acc.expect("quadrature rule has nodes")
            }
        }
    }
}

fn coefficient_rule() -> &'static LegendreRule {
    static RULE: std::sync::OnceLock<LegendreRule> = std::sync::OnceLock::new();
    RULE.get_or_init(|| LegendreRule::new(24))
}

/// Constants of the Gaussian bounds: `p ≤ big_c·q`, `|∂ₓ₀p| ≤ big_c·q/√(t−s)`,
/// with `q` the isotropic Gaussian of variance `(t−s)/(2·c_u)` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub big_c: f64,
    pub c_u: f64,
}

/// Worst observed ratios from [`KernelModel::verify_bounds`]; both must be ≤ 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub worst_ratio_p: f64,
    pub worst_ratio_grad: f64,
}

impl BoundCheck {
    pub fn holds(&self) -> bool {
        self.worst_ratio_p <= 1.0 && self.worst_ratio_grad <= 1.0
    }
}

/// Gaussian fundamental solution for space-independent coefficients.
#[derive(Debug, Clone)]
pub struct KernelModel {
    dim: usize,
    horizon: f64,
    diffusion: TimeMatrix,
    drift: TimeVector,
    min_eig: f64,
    max_eig: f64,
    max_drift: f64,
    bounds: BoundConstants,
}

impl KernelModel {
    /// Builds the kernel for diffusion `a(t)` and drift `b₀(t)` on `[0, T]` and
    /// derives `(C_u, c_u)` from the ellipticity range of `a`.
    pub fn new(dim: usize, horizon: f64, diffusion: TimeMatrix, drift: TimeVector) -> Result<Self> {
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let samples: Vec<f64> = if diffusion.is_constant() && drift.is_constant() {
            vec![0.0]
        } else {
            (0..=128).map(|i| horizon * i as f64 / 128.0).collect()
        };
        let mut min_eig = f64::INFINITY;
        let mut max_eig: f64 = 0.0;
        let mut max_drift: f64 = 0.0;
        for &t in &samples {
            let a = diffusion.at(t);
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.nrows(),
                });
            }
            let b = drift.at(t);
            if b.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.len(),
                });
            }
            let sym = (&a + a.transpose()) * 0.5;
            let eig = SymmetricEigen::new(sym).eigenvalues;
            min_eig = min_eig.min(eig.min());
            max_eig = max_eig.max(eig.max());
            max_drift = max_drift.max(b.norm());
        }
        if !(min_eig > 0.0) {
            return Err(Error::NotElliptic(min_eig));
        }
        let mut kernel = Self {
            dim,
            horizon,
            diffusion,
            drift,
            min_eig,
            max_eig,
            max_drift,
            bounds: BoundConstants {
                big_c: 0.0,
                c_u: 0.0,
            },
        };
        kernel.bounds = kernel.derive_bound_constants(1.0 / (4.0 * max_eig))?;
        Ok(kernel)
    }

    /// Brownian kernel with `a = ν·I`, `b₀ = 0`.
    pub fn brownian(dim: usize, nu: f64, horizon: f64) -> Result<Self> {
        Self::new(
            dim,
            horizon,
            TimeMatrix::scaled_identity(dim, nu),
            TimeVector::zeros(dim),
        )
    }

    /// Replaces the bound constants with a hand-picked candidate.
    pub fn with_bound_constants(mut self, bounds: BoundConstants) -> Self {
        self.bounds = bounds;
        self
    }

    /// Smallest `C_u` for a given `c_u`, from maximizing the ratio of the
    /// Gaussian (and of its gradient) to `q` over the scaled displacement.
    pub fn derive_bound_constants(&self, c_u: f64) -> Result<BoundConstants> {
        let kappa = 1.0 / (2.0 * c_u);
        let (mu, lam) = (self.min_eig, self.max_eig);
        if !(kappa > lam) {
            return Err(Error::InvalidParameter(format!(
                "c_u = {c_u} too large: q must be wider than the kernel (need 1/(2c_u) > {lam})"
            )));
        }
        let prefactor = (kappa / mu).powf(0.5 * self.dim as f64);
        // Drift displacement |m|/√Δ ≤ B√T enters through q's centre.
        let eta = self.max_drift * self.horizon.sqrt();
        let c_p = prefactor * (eta * eta / (2.0 * (kappa - lam))).exp();
        // ρ ↦ ρ·exp(−ρ²/(2λ) + (ρ+η)²/(2κ)) peaks where Aρ² − (η/κ)ρ − 1 = 0.
        let a = 1.0 / lam - 1.0 / kappa;
        let rho = (eta / kappa + ((eta / kappa).powi(2) + 4.0 * a).sqrt()) / (2.0 * a);
        let peak = rho * (-rho * rho / (2.0 * lam) + (rho + eta).powi(2) / (2.0 * kappa)).exp();
        let c_grad = prefactor * peak / mu;
        Ok(BoundConstants {
            big_c: c_p.max(c_grad),
            c_u,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn bounds(&self) -> BoundConstants {
        self.bounds
    }

    /// `C_u`.
    pub fn c_big(&self) -> f64 {
        self.bounds.big_c
    }

    /// Ellipticity constant `μ` (smallest eigenvalue of `a` over `[0,T]`).
    pub fn ellipticity(&self) -> f64 {
        self.min_eig
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eig
    }

    pub fn diffusion(&self) -> &TimeMatrix {
        &self.diffusion
    }

    pub fn drift(&self) -> &TimeVector {
        &self.drift
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.diffusion.is_constant() && self.drift.is_constant()
    }

    /// `∫ₛᵗ a(r) dr`.
    pub fn covariance(&self, s: f64, t: f64) -> DMatrix<f64> {
        self.diffusion.integral(s, t)
    }

    /// `∫ₛᵗ b₀(r) dr`.
    pub fn mean_shift(&self, s: f64, t: f64) -> DVector<f64> {
        self.drift.integral(s, t)
    }

    /// The kernel frozen at the time pair `(s, t)`.
    pub fn transition(&self, s: f64, t: f64) -> Result<Transition> {
        if !(s < t) {
            return Err(Error::InvalidTimes(format!("s < t, got s = {s}, t = {t}")));
        }
        Transition::new(self.covariance(s, t), self.mean_shift(s, t), s, t)
    }

    pub fn eval_p(&self, s: f64, x0: &[f64], t: f64, x: &[f64]) -> Result<f64> {
        self.check_point(x0)?;
        self.check_point(x)?;
        Ok(self.transition(s, t)?.density(x0, x))
    }

    /// `∂ₓ₀ p(s,x₀,t,x) = Σ⁻¹(x − x₀ − m)·p`.
    pub fn eval_grad_p(&self, s: f64, x0: &[f64], t: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x0)?;
        self.check_point(x)?;
        Ok(self.transition(s, t)?.grad_x0(x0, x))
    }

    /// The comparison density `q(s,x₀,t,x)`.
    pub fn eval_q(&self, s: f64, x0: &[f64], t: f64, x: &[f64]) -> f64 {
        let var = (t - s) / (2.0 * self.bounds.c_u);
        let r2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum();
        (-0.5 * self.dim as f64 * (LN_2PI + var.ln()) - 0.5 * r2 / var).exp()
    }

    /// `(p/(C_u q), |∂p|·√(t−s)/(C_u q))` at one point.
    pub fn bound_ratios_at(&self, s: f64, x0: &[f64], t: f64, x: &[f64]) -> Result<(f64, f64)> {
        let tr = self.transition(s, t)?;
        Ok(self.ratios_with(&tr, x0, x))
    }

    fn ratios_with(&self, tr: &Transition, x0: &[f64], x: &[f64]) -> (f64, f64) {
        let (s, t) = (tr.s, tr.t);
        let c = self.bounds.big_c;
        // Work with logs so far tails do not produce 0/0.
        let log_q = {
            let var = (t - s) / (2.0 * self.bounds.c_u);
            let r2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b).powi(2)).sum();
            -0.5 * self.dim as f64 * (LN_2PI + var.ln()) - 0.5 * r2 / var
        };
        let log_p = tr.log_density(x0, x);
        let grad_dir = tr.precision_times_residual(x0, x);
        let grad_norm = grad_dir.iter().map(|g| g * g).sum::<f64>().sqrt();
        let ratio_p = (log_p - log_q).exp() / c;
        let ratio_g = if grad_norm == 0.0 {
            0.0
        } else {
            (grad_norm.ln() + log_p - log_q).exp() * (t - s).sqrt() / c
        };
        (ratio_p, ratio_g)
    }

    /// Draws random `(s,x₀,t,x)` and returns the largest bound ratios seen.
    pub fn verify_bounds(&self, sample_count: usize, seed: u64) -> BoundCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = self.dim;
        let mut worst = BoundCheck {
            worst_ratio_p: 0.0,
            worst_ratio_grad: 0.0,
        };
        let mut x0 = vec![0.0; d];
        let mut x = vec![0.0; d];
        let spread = 6.0 * self.max_eig.sqrt();
        let mut drawn = 0;
        while drawn < sample_count {
            let a: f64 = rng.random::<f64>() * self.horizon;
            let b: f64 = rng.random::<f64>() * self.horizon;
            let (s, t) = if a < b { (a, b) } else { (b, a) };
            if t - s < 1e-9 {
                continue;
            }
            let Ok(tr) = self.transition(s, t) else {
                continue;
            };
            let sd = (t - s).sqrt();
            for j in 0..d {
                x0[j] = 4.0 * (2.0 * rng.random::<f64>() - 1.0);
                x[j] = x0[j] + tr.shift[j] + sd * spread * (2.0 * rng.random::<f64>() - 1.0);
            }
            let (rp, rg) = self.ratios_with(&tr, &x0, &x);
            worst.worst_ratio_p = worst.worst_ratio_p.max(rp);
            worst.worst_ratio_grad = worst.worst_ratio_grad.max(rg);
            drawn += 1;
        }
        worst
    }

    /// `|p(s,x₀,r,y) − ∫ p(s,x₀,t,x) p(t,x,r,y) dx|`, with the `x` integral by
    /// tensor trapezoid over `quad_nodes` nodes per axis on a box sized to the
    /// Gaussian bridge between `(s,x₀)` and `(r,y)`.
    pub fn chapman_kolmogorov_residual(
        &self,
        s: f64,
        t: f64,
        r: f64,
        x0: &[f64],
        y: &[f64],
        quad_nodes: usize,
    ) -> Result<f64> {
        if !(s < t && t < r) {
            return Err(Error::InvalidTimes(format!(
                "s < t < r, got s = {s}, t = {t}, r = {r}"
            )));
        }
        if quad_nodes < 2 {
            return Err(Error::InvalidParameter(
                "need at least 2 quadrature nodes".into(),
            ));
        }
        self.check_point(x0)?;
        self.check_point(y)?;
        let d = self.dim;
        let first = self.transition(s, t)?;
        let second = self.transition(t, r)?;
        let whole = self.transition(s, r)?;
        let direct = whole.density(x0, y);

        // Bridge law of X_t given X_s = x₀, X_r = y.
        let inv_total = whole.chol.inverse();
        let gain = &first.cov * &inv_total;
        let resid = DVector::from_iterator(d, (0..d).map(|j| y[j] - x0[j] - whole.shift[j]));
        let centre: Vec<f64> = (0..d)
            .map(|j| x0[j] + first.shift[j] + (&gain * &resid)[j])
            .collect();
        let bridge_cov = &first.cov - &gain * &first.cov;
        let bridge_sd = SymmetricEigen::new((&bridge_cov + bridge_cov.transpose()) * 0.5)
            .eigenvalues
            .max()
            .max(0.0)
            .sqrt();
        let half = 12.0 * bridge_sd.max(1e-300);
        let h = 2.0 * half / (quad_nodes - 1) as f64;
        let weights = crate::quadrature::trapezoid_weights(quad_nodes, h);

        let total = quad_nodes.pow(d as u32);
        let mut x = vec![0.0; d];
        let mut integral = 0.0;
        for flat in 0..total {
            let mut rem = flat;
            let mut w = 1.0;
            for j in (0..d).rev() {
                let i = rem % quad_nodes;
                rem /= quad_nodes;
                x[j] = centre[j] - half + i as f64 * h;
                w *= weights[i];
            }
            integral += w * first.density(x0, &x) * second.density(&x, y);
        }
        Ok((direct - integral).abs())
    }

    /// `û₀(r,φ)(t,·) = ∫ p(r,x₀,t,·) φ(x₀) dx₀` on the grid.
    pub fn convolve_initial(
        &self,
        grid: &SpatialGrid,
        phi: &[f64],
        r: f64,
        t: f64,
    ) -> Result<Vec<f64>> {
        let spectral = Spectral::new(grid);
        self.convolve_initial_with(&spectral, phi, r, t)
    }

    pub fn convolve_initial_with(
        &self,
        spectral: &Spectral,
        phi: &[f64],
        r: f64,
        t: f64,
    ) -> Result<Vec<f64>> {
        if !(r < t) {
            return Err(Error::InvalidTimes(format!("r < t, got r = {r}, t = {t}")));
        }
        if spectral.grid().dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: spectral.grid().dim(),
            });
        }
        if phi.len() != spectral.len() {
            return Err(Error::DimensionMismatch {
                expected: spectral.len(),
                found: phi.len(),
            });
        }
        Ok(spectral.convolve(phi, &self.covariance(r, t), &self.mean_shift(r, t)))
    }

    /// Trapezoid mass of `x ↦ p(s,x₀,t,x)` over the grid's box.
    pub fn mass_over_box(&self, grid: &SpatialGrid, s: f64, x0: &[f64], t: f64) -> Result<f64> {
        let tr = self.transition(s, t)?;
        let vals = grid.sample(|x| tr.density(x0, x));
        Ok(grid.integrate(&vals))
    }

    /// Trapezoid integral of `x ↦ ∂ₓ₀ⱼ p(s,x₀,t,x)` over the grid's box.
    pub fn gradient_mass_over_box(
        &self,
        grid: &SpatialGrid,
        s: f64,
        x0: &[f64],
        t: f64,
        axis: usize,
    ) -> Result<f64> {
        let tr = self.transition(s, t)?;
        let vals = grid.sample(|x| tr.grad_x0(x0, x)[axis]);
        Ok(grid.integrate(&vals))
    }

    /// Half-width that keeps every kernel's per-axis tail mass (started from
    /// the origin, over any `[s,t] ⊂ [0,T]`) below `eps_tail`.
    pub fn tail_radius(&self, eps_tail: f64) -> f64 {
        let std_normal = Normal::standard();
        let z = std_normal.inverse_cdf(1.0 - eps_tail / (2.0 * self.dim as f64));
        self.max_drift * self.horizon + z * (self.max_eig * self.horizon).sqrt()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Gaussian kernel frozen at one time pair.
#[derive(Debug, Clone)]
pub struct Transition {
    pub s: f64,
    pub t: f64,
    pub cov: DMatrix<f64>,
    pub shift: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl Transition {
    pub fn new(cov: DMatrix<f64>, shift: DVector<f64>, s: f64, t: f64) -> Result<Self> {
        let chol = Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite { s, t })?;
        let d = cov.nrows();
        let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite { s, t });
        }
        let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
        Ok(Self {
            s,
            t,
            cov,
            shift,
            chol,
            log_norm,
        })
    }

    fn residual(&self, x0: &[f64], x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), (0..x.len()).map(|j| x[j] - x0[j] - self.shift[j]))
    }

    pub fn log_density(&self, x0: &[f64], x: &[f64]) -> f64 {
        let y = self.residual(x0, x);
        let z = self
            .chol
            .l()
            .solve_lower_triangular(&y)
            .expect("triangular solve");
        self.log_norm - 0.5 * z.norm_squared()
    }

    pub fn density(&self, x0: &[f64], x: &[f64]) -> f64 {
        self.log_density(x0, x).exp()
    }

    fn precision_times_residual(&self, x0: &[f64], x: &[f64]) -> Vec<f64> {
        let y = self.residual(x0, x);
        self.chol.solve(&y).iter().copied().collect()
    }

    pub fn grad_x0(&self, x0: &[f64], x: &[f64]) -> Vec<f64> {
        let p = self.density(x0, x);
        self.precision_times_residual(x0, x)
            .into_iter()
            .map(|g| g * p)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_1d() -> KernelModel {
        KernelModel::brownian(1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn eval_p_standard_normal_at_mode() {
        let k = unit_1d();
        let v = k.eval_p(0.0, &[0.0], 1.0, &[0.0]).unwrap();
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eval_p_follows_drift_integral() {
        let k = KernelModel::new(
            1,
            1.0,
            TimeMatrix::scaled_identity(1, 1.0),
            TimeVector::Constant(DVector::from_element(1, 1.0)),
        )
        .unwrap();
        let v = k.eval_p(0.0, &[0.0], 1.0, &[1.0]).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn eval_p_bivariate_mode() {
        let k = KernelModel::brownian(2, 1.0, 1.0).unwrap();
        let v = k.eval_p(0.0, &[0.0, 0.0], 0.5, &[0.0, 0.0]).unwrap();
        assert!((v - 1.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn eval_p_rejects_bad_times() {
        let k = unit_1d();
        assert!(matches!(
            k.eval_p(0.5, &[0.0], 0.5, &[0.0]),
            Err(Error::InvalidTimes(_))
        ));
        assert!(k.eval_p(0.6, &[0.0], 0.5, &[0.0]).is_err());
    }

    #[test]
    fn non_positive_definite_covariance_rejected() {
        // Elliptic at sampled times but the accumulated covariance of a
        // deliberately broken candidate is checked directly.
        let err = Transition::new(
            DMatrix::from_element(1, 1, -1.0),
            DVector::zeros(1),
            0.0,
            1.0,
        );
        assert!(matches!(err, Err(Error::NotPositiveDefinite { .. })));
        let degenerate = KernelModel::new(
            1,
            1.0,
            TimeMatrix::scaled_identity(1, 0.0),
            TimeVector::zeros(1),
        );
        assert!(matches!(degenerate, Err(Error::NotElliptic(_))));
    }

    #[test]
    fn gradient_examples() {
        let k = unit_1d();
        assert_eq!(k.eval_grad_p(0.0, &[0.0], 1.0, &[0.0]).unwrap()[0], 0.0);
        let g = k.eval_grad_p(0.0, &[0.0], 1.0, &[1.0]).unwrap()[0];
        let expected = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert!((g - expected).abs() < 1e-15);
        assert!((expected - 0.241_971).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_finite_difference_in_x0() {
        let k = unit_1d();
        let (s, t, x) = (0.0, 0.01, 0.2);
        let g = k.eval_grad_p(s, &[0.0], t, &[x]).unwrap()[0];
        let h = 1e-6;
        let fd = (k.eval_p(s, &[h], t, &[x]).unwrap() - k.eval_p(s, &[-h], t, &[x]).unwrap())
            / (2.0 * h);
        assert!(((g - fd) / g).abs() < 1e-6, "{g} vs {fd}");
    }

    #[test]
    fn derived_constants_for_unit_brownian() {
        // c_u = 1/4 ⇒ q has variance 2Δ; sup p/q = √2 at the mode and the
        // gradient ratio peaks at 2/√e < √2.
        let b = unit_1d().bounds();
        assert!((b.c_u - 0.25).abs() < 1e-15);
        assert!((b.big_c - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn bounds_hold_and_rescaling_breaks_old_constants() {
        let k = unit_1d();
        assert!(k.verify_bounds(10_000, 1).holds());
        let degenerate = k.bound_ratios_at(0.0, &[0.3], 1.0, &[0.3]).unwrap();
        assert_eq!(degenerate.1, 0.0);

        let scaled = KernelModel::brownian(1, 4.0, 1.0).unwrap();
        let stale = scaled.clone().with_bound_constants(k.bounds());
        assert!(!stale.verify_bounds(10_000, 2).holds());
        assert!(scaled.verify_bounds(10_000, 2).holds());
    }

    #[test]
    fn chapman_kolmogorov_examples() {
        let k = unit_1d();
        assert!(
            k.chapman_kolmogorov_residual(0.0, 0.5, 1.0, &[0.0], &[0.0], 256)
                .unwrap()
                <= 1e-8
        );
        assert!(
            k.chapman_kolmogorov_residual(0.0, 0.5, 1.0, &[0.0], &[2.0], 256)
                .unwrap()
                <= 1e-8
        );
        let varying = KernelModel::new(
            1,
            1.0,
            TimeMatrix::varying(|t| DMatrix::from_element(1, 1, 1.0 + t)),
            TimeVector::zeros(1),
        )
        .unwrap();
        assert!(
            varying
                .chapman_kolmogorov_residual(0.0, 0.3, 0.9, &[0.0], &[0.4], 256)
                .unwrap()
                <= 1e-7
        );
        assert!(k
            .chapman_kolmogorov_residual(0.0, 0.7, 0.5, &[0.0], &[0.0], 256)
            .is_err());
    }

    #[test]
    fn time_varying_covariance_accumulates() {
        let k = KernelModel::new(
            1,
            1.0,
            TimeMatrix::varying(|t| DMatrix::from_element(1, 1, 1.0 + t)),
            TimeVector::zeros(1),
        )
        .unwrap();
        // ∫_{0.3}^{0.9} (1 + r) dr = 0.6 + (0.81 − 0.09)/2
        let c = k.covariance(0.3, 0.9)[(0, 0)];
        assert!((c - 0.96).abs() < 1e-14);
        assert!((k.ellipticity() - 1.0).abs() < 1e-14);
        assert!((k.max_eigenvalue() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn convolve_initial_of_gaussian() {
        let grid = SpatialGrid::new(1, 10.0, 512).unwrap();
        let k = unit_1d();
        let phi = grid.sample(|x| (-0.5 * x[0] * x[0] / 0.04).exp() / (2.0 * PI * 0.04).sqrt());
        let out = k.convolve_initial(&grid, &phi, 0.0, 1.0).unwrap();
        let mid = grid.nearest(&[0.0]).unwrap();
        // 512 nodes on [-10, 10] do not put a node at 0; evaluate the oracle at the node.
        let x = grid.coords(mid)[0];
        let expected = (-0.5 * x * x / 1.04).exp() / (2.0 * PI * 1.04).sqrt();
        assert!((out[mid] - expected).abs() < 1e-12);
        assert!(k.convolve_initial(&grid, &phi, 1.0, 1.0).is_err());
    }
}
