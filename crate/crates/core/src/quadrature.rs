//! Fixed-node quadrature rules.
//!
//! Time integrals against the gradient of the kernel carry a `1/√(t−s)`
//! singularity at the upper endpoint. [`integrate_sqrt_endpoint`] removes it
//! with the substitution `s = t − w²`, after which Gauss-Legendre nodes in `w`
//! see a bounded integrand.

use std::num::NonZeroUsize;

use gauss_quad::{GaussHermite, GaussLegendre};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct LegendreRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LegendreRule {
    /// # Panics
    /// If `order` is zero.
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order).expect("Gauss-Legendre order must be positive");
        let rule = GaussLegendre::new(order);
        let (nodes, weights): (Vec<f64>, Vec<f64>) =
            rule.into_node_weight_pairs().into_vec().into_iter().unzip();
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// `∫_a^b f(s) ds` for integrands that may blow up like `1/√(b−s)`.
///
/// Uses `s = b − w²`, `ds = 2w dw`, so the transformed integrand
/// `2w·f(b − w²)` stays bounded at `w = 0`.
pub fn integrate_sqrt_endpoint(
    rule: &LegendreRule,
    a: f64,
    b: f64,
    mut f: impl FnMut(f64) -> f64,
) -> f64 {
    debug_assert!(a <= b);
    let w_max = (b - a).sqrt();
    rule.integrate(0.0, w_max, |w| 2.0 * w * f(b - w * w))
}

/// `∫_0^Δ dω / √((Δ−ω)ω)` with both endpoint singularities substituted away.
///
/// The exact value is `B(½,½) = π` for every `Δ > 0`.
pub fn beta_half_half(rule: &LegendreRule, delta: f64) -> f64 {
    let half = 0.5 * delta;
    // ω = w² on [0, Δ/2]: integrand 2/√(Δ − w²); the upper half is the mirror image.
    let lower = rule.integrate(0.0, half.sqrt(), |w| 2.0 / (delta - w * w).sqrt());
    let upper = integrate_sqrt_endpoint(rule, half, delta, |s| 1.0 / ((delta - s) * s).sqrt());
    lower + upper
}

/// Probabilists' Gauss-Hermite rule: `E[f(Z)]` for `Z ~ N(0,1)`.
#[derive(Debug, Clone)]
pub struct HermiteRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl HermiteRule {
    pub fn new(order: usize) -> Self {
        let order = NonZeroUsize::new(order).expect("Gauss-Hermite order must be positive");
        let rule = GaussHermite::new(order);
        let scale = std::f64::consts::PI.sqrt().recip();
        let (nodes, weights) = rule
            .into_node_weight_pairs()
            .into_vec()
            .into_iter()
            .map(|(x, w)| (x * std::f64::consts::SQRT_2, w * scale))
            .unzip();
        Self { nodes, weights }
    }

    /// Standard-normal nodes `zᵢ` and weights summing to one.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// Composite trapezoid weights for `n` uniform nodes with spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n >= 2 {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Trapezoid rule over uniformly spaced samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (values[1..n - 1].iter().sum::<f64>() + 0.5 * (values[0] + values[n - 1])),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = LegendreRule::new(6);
        let v = rule.integrate(0.0, 2.0, |x| x.powi(11));
        assert!((v - 2f64.powi(12) / 12.0).abs() < 1e-10);
    }

    #[test]
    fn beta_identity_is_pi() {
        let rule = LegendreRule::new(24);
        for delta in [0.01, 0.1, 1.0, 7.5] {
            let v = beta_half_half(&rule, delta);
            assert!((v - std::f64::consts::PI).abs() < 1e-10, "Δ={delta}: {v}");
        }
    }

    #[test]
    fn sqrt_endpoint_handles_inverse_sqrt() {
        // ∫_0^t (t−s)^{-1/2} ds = 2√t
        let rule = LegendreRule::new(4);
        let t: f64 = 0.37;
        let v = integrate_sqrt_endpoint(&rule, 0.0, t, |s| 1.0 / (t - s).sqrt());
        assert!((v - 2.0 * t.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn hermite_moments() {
        let rule = HermiteRule::new(40);
        let m0: f64 = rule.pairs().map(|(_, w)| w).sum();
        let m2: f64 = rule.pairs().map(|(z, w)| w * z * z).sum();
        let m4: f64 = rule.pairs().map(|(z, w)| w * z.powi(4)).sum();
        assert!((m0 - 1.0).abs() < 1e-12);
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m4 - 3.0).abs() < 1e-11);
    }

    #[test]
    fn trapezoid_matches_weights() {
        let v = [1.0, 2.0, 4.0, 3.0];
        let w = trapezoid_weights(4, 0.5);
        let a: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        assert_eq!(a, trapezoid(&v, 0.5));
    }
}
