//! Time integration of the Picard map on one slab.
//!
//! In Fourier variables both kernel terms become
//! `Â(t) = ∫ᵣᵗ exp(−Γ(s,t)) X(s) ds` with
//! `X = FFT(Λ̂) + Σⱼ (−iκⱼ)·FFT(b̂ⱼ)`, where `exp(−Γ(s,t))` is the symbol of
//! `x₀ ↦ p(s,x₀,t,·)`. Between time levels `X` is either held at its left value
//! or interpolated linearly. For constant coefficients the resulting integral is
//! evaluated exactly; otherwise Gauss-Legendre nodes are placed in `w` with
//! `s = t − w²`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::kernel::KernelModel;
use crate::quadrature::LegendreRule;
use crate::spectral::Spectral;

/// How the sources are represented between two time levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRule {
    /// Piecewise constant from the left level; keeps the scheme explicit.
    #[default]
    LeftPoint,
    /// Piecewise linear between levels.
    Trapezoid,
}

/// How the time integral against the kernel symbol is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeQuadrature {
    /// Exact exponential weights when the coefficients are constant in time,
    /// otherwise `SqrtSubstitution(8)`.
    #[default]
    Auto,
    /// Gauss-Legendre of the given order in `w`, `s = t − w²`, per time step.
    SqrtSubstitution(usize),
}

const DEFAULT_SQRT_NODES: usize = 8;

enum Weights {
    Exact {
        decay: Vec<Complex64>,
        w_old: Vec<Complex64>,
        w_new: Vec<Complex64>,
    },
    Sqrt(LegendreRule),
}

pub(crate) struct SlabOperator<'a> {
    spectral: &'a Spectral,
    kernel: &'a KernelModel,
    dt: f64,
    rule: TimeRule,
    weights: Weights,
}

/// `(1 − e^{−z})/z`.
pub(crate) fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for n in 1..20 {
            term *= -z / (n as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (1.0 - (-z).exp()) / z
    }
}

/// `∫₀¹ e^{−zσ} σ dσ = (1 − (1+z)e^{−z})/z²`.
pub(crate) fn psi(z: Complex64) -> Complex64 {
    if z.norm() < 0.5 {
        // Σ (−z)ⁿ (n+1)/(n+2)!
        let mut power = Complex64::new(1.0, 0.0);
        let mut fact = 2.0;
        let mut sum = Complex64::new(0.5, 0.0);
        for n in 1..20 {
            power *= -z;
            fact *= n as f64 + 2.0;
            sum += power * ((n + 1) as f64 / fact);
        }
        sum
    } else {
        (1.0 - (1.0 + z) * (-z).exp()) / (z * z)
    }
}

impl<'a> SlabOperator<'a> {
    pub(crate) fn new(
        spectral: &'a Spectral,
        kernel: &'a KernelModel,
        dt: f64,
        rule: TimeRule,
        quadrature: TimeQuadrature,
    ) -> Self {
        let weights = match quadrature {
            TimeQuadrature::Auto if kernel.is_time_homogeneous() => {
                let cov = kernel.covariance(0.0, dt);
                let shift = kernel.mean_shift(0.0, dt);
                let n = spectral.len();
                let mut decay = Vec::with_capacity(n);
                let mut w_old = Vec::with_capacity(n);
                let mut w_new = Vec::with_capacity(n);
                for flat in 0..n {
                    let z = spectral.gaussian_exponent(flat, &cov, &shift);
                    decay.push((-z).exp());
                    let p1 = phi1(z);
                    match rule {
                        TimeRule::LeftPoint => {
                            w_old.push(p1 * dt);
                            w_new.push(Complex64::new(0.0, 0.0));
                        }
                        TimeRule::Trapezoid => {
                            let ps = psi(z);
                            w_old.push(ps * dt);
                            w_new.push((p1 - ps) * dt);
                        }
                    }
                }
                Weights::Exact {
                    decay,
                    w_old,
                    w_new,
                }
            }
            TimeQuadrature::Auto => Weights::Sqrt(LegendreRule::new(DEFAULT_SQRT_NODES)),
            TimeQuadrature::SqrtSubstitution(order) => {
                Weights::Sqrt(LegendreRule::new(order.max(1)))
            }
        };
        Self {
            spectral,
            kernel,
            dt,
            rule,
            weights,
        }
    }

    /// Whether `X` at the slab's last level is needed.
    pub(crate) fn uses_right_level(&self) -> bool {
        self.rule == TimeRule::Trapezoid
    }

    /// Given `X_j` for levels `j = 0..=m` of a slab starting at `r`
    /// (the last entry is ignored by the left-point rule), returns `Π` at every
    /// slab level in physical space. Level 0 is identically zero.
    pub(crate) fn integrate(&self, r: f64, sources: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
        let m = sources.len() - 1;
        let n = self.spectral.len();
        let spectra: Vec<Vec<Complex64>> = match &self.weights {
            Weights::Exact {
                decay,
                w_old,
                w_new,
            } => {
                let mut acc = vec![Complex64::new(0.0, 0.0); n];
                let mut out = Vec::with_capacity(m);
                for j in 1..=m {
                    let prev = &sources[j - 1];
                    match self.rule {
                        TimeRule::LeftPoint => {
                            for q in 0..n {
                                acc[q] = decay[q] * acc[q] + w_old[q] * prev[q];
                            }
                        }
                        TimeRule::Trapezoid => {
                            let next = &sources[j];
                            for q in 0..n {
                                acc[q] =
                                    decay[q] * acc[q] + w_old[q] * prev[q] + w_new[q] * next[q];
                            }
                        }
                    }
                    out.push(acc.clone());
                }
                out
            }
            Weights::Sqrt(rule) => (1..=m)
                .into_par_iter()
                .map(|j| self.sqrt_level(rule, r, j, sources))
                .collect(),
        };
        let mut levels = Vec::with_capacity(m + 1);
        levels.push(vec![0.0; n]);
        levels.extend(
            spectra
                .into_par_iter()
                .map(|s| self.spectral.inverse(s))
                .collect::<Vec<_>>(),
        );
        levels
    }

    fn sqrt_level(
        &self,
        rule: &LegendreRule,
        r: f64,
        j: usize,
        sources: &[Vec<Complex64>],
    ) -> Vec<Complex64> {
        let n = self.spectral.len();
        let h = self.dt;
        let t = r + j as f64 * h;
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..j {
            let ti = r + i as f64 * h;
            let lo = (t - (ti + h)).max(0.0).sqrt();
            let hi = (t - ti).sqrt();
            for (w, gw) in rule.mapped(lo, hi) {
                let s = t - w * w;
                let weight = 2.0 * w * gw;
                let cov = self.kernel.covariance(s, t);
                let shift = self.kernel.mean_shift(s, t);
                let theta = ((s - ti) / h).clamp(0.0, 1.0);
                let (a, b) = match self.rule {
                    TimeRule::LeftPoint => (1.0, 0.0),
                    TimeRule::Trapezoid => (1.0 - theta, theta),
                };
                for q in 0..n {
                    let symbol = (-self.spectral.gaussian_exponent(q, &cov, &shift)).exp();
                    let mut x = sources[i][q] * a;
                    if b != 0.0 {
                        x += sources[i + 1][q] * b;
                    }
                    acc[q] += symbol * x * weight;
                }
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_and_closed_forms_agree_near_the_switch() {
        for z in [
            Complex64::new(0.49, 0.0),
            Complex64::new(0.3, 0.35),
            Complex64::new(0.0, 0.49),
        ] {
            let direct1 = (1.0 - (-z).exp()) / z;
            let direct2 = (1.0 - (1.0 + z) * (-z).exp()) / (z * z);
            assert!((phi1(z) - direct1).norm() < 1e-13);
            assert!((psi(z) - direct2).norm() < 1e-12);
        }
        assert!((phi1(Complex64::new(0.0, 0.0)).re - 1.0).abs() < 1e-16);
        assert!((psi(Complex64::new(0.0, 0.0)).re - 0.5).abs() < 1e-16);
    }
}
