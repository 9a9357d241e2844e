//! Reference solutions: closed forms for the heat and constant-growth cases, a
//! Gauss-Hermite evaluation of the Burgers representation formula, and a
//! conservative finite-volume Burgers solver.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec, SpatialGrid};
use crate::problem::InitialDensity;
use crate::quadrature::HermiteRule;

/// Density of `N(u0_mean, u0_var + νt)` at `x`.
pub fn heat_oracle(u0_mean: f64, u0_var: f64, nu: f64, t: f64, x: f64) -> f64 {
    let var = u0_var + nu * t;
    (-0.5 * (x - u0_mean).powi(2) / var).exp() / (2.0 * PI * var).sqrt()
}

/// Isotropic `d`-dimensional version of [`heat_oracle`].
pub fn heat_oracle_nd(u0_mean: &[f64], u0_var: f64, nu: f64, t: f64, x: &[f64]) -> f64 {
    x.iter()
        .zip(u0_mean)
        .map(|(xi, mi)| heat_oracle(*mi, u0_var, nu, t, *xi))
        .product()
}

/// `e^{λt}`.
pub fn exp_mass_oracle(lambda: f64, t: f64) -> f64 {
    (lambda * t).exp()
}

/// Scaling of the Burgers representation formula
/// `u(t,x) = E[u₀(x+σB_t) e^{−U₀(x+σB_t)/κ}] / E[e^{−U₀(x+σB_t)/κ}]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurgersVariant {
    /// `σ = ν`, `κ = ν²`.
    AsPrinted,
    /// `σ = √ν`, `κ = ν` (Cole-Hopf for `∂ₜu = (ν/2)∂²ₓu − u∂ₓu`).
    ColeHopf,
}

pub const BURGERS_HERMITE_NODES: usize = 200;

/// Gauss-Hermite evaluation of the Burgers representation formula.
#[derive(Debug, Clone)]
pub struct BurgersFormula {
    rule: HermiteRule,
    variant: BurgersVariant,
}

impl BurgersFormula {
    pub fn new(variant: BurgersVariant) -> Self {
        Self::with_nodes(variant, BURGERS_HERMITE_NODES)
    }

    pub fn with_nodes(variant: BurgersVariant, nodes: usize) -> Self {
        Self {
            rule: HermiteRule::new(nodes),
            variant,
        }
    }

    pub fn variant(&self) -> BurgersVariant {
        self.variant
    }

    /// `u(t,x)`; `u0` must be one-dimensional. The exponent is shifted by its
    /// maximum over the nodes before exponentiation.
    pub fn eval(&self, u0: &InitialDensity, nu: f64, t: f64, x: f64) -> Result<f64> {
        self.eval_signed(u0, nu, t, x, 1.0)
    }

    /// Same quadrature with the Gaussian nodes negated.
    pub fn eval_flipped(&self, u0: &InitialDensity, nu: f64, t: f64, x: f64) -> Result<f64> {
        self.eval_signed(u0, nu, t, x, -1.0)
    }

    fn eval_signed(&self, u0: &InitialDensity, nu: f64, t: f64, x: f64, sign: f64) -> Result<f64> {
        if !(nu > 0.0) || t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need ν > 0 and t ≥ 0, got ν = {nu}, t = {t}"
            )));
        }
        u0.cdf_1d(0.0)?;
        if t == 0.0 {
            return Ok(u0.density(&[x]));
        }
        let (sigma, kappa) = match self.variant {
            BurgersVariant::AsPrinted => (nu, nu * nu),
            BurgersVariant::ColeHopf => (nu.sqrt(), nu),
        };
        let scale = sigma * t.sqrt();
        let mut points = Vec::with_capacity(BURGERS_HERMITE_NODES);
        let mut max_exp = f64::NEG_INFINITY;
        for (z, w) in self.rule.pairs() {
            let y = x + sign * scale * z;
            let e = -u0.cdf_1d(y)? / kappa;
            max_exp = max_exp.max(e);
            points.push((y, w, e));
        }
        let (mut num, mut den) = (0.0, 0.0);
        for (y, w, e) in points {
            let factor = w * (e - max_exp).exp();
            num += factor * u0.density(&[y]);
            den += factor;
        }
        if !(den > 0.0) || !den.is_finite() {
            return Err(Error::Underflow(x));
        }
        Ok(num / den)
    }
}

/// Finite-volume Burgers reference solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdSettings {
    /// Fine cells per coarse cell; coarse node `i` sits on fine node `r·i`.
    pub refinement: usize,
    pub cfl: f64,
    /// Requested step; rejected if above the stability limit.
    pub dt: Option<f64>,
}

impl Default for FdSettings {
    fn default() -> Self {
        Self {
            refinement: 4,
            cfl: 0.4,
            dt: None,
        }
    }
}

/// Solves `∂ₜu + ∂ₓ(u²/2 − (ν/2)∂ₓu) = 0` on the box with zero-flux walls and
/// returns it at the levels of `grid` (one-dimensional).
///
/// Interface fluxes are `(uᵢ² + uᵢ₊₁²)/4 − (ν/2)(uᵢ₊₁ − uᵢ)/h`, time stepping is
/// two-stage SSP Runge-Kutta, and the mass `h Σ uᵢ` is conserved exactly up
/// to rounding.
pub fn burgers_fd_reference(
    u0: &InitialDensity,
    nu: f64,
    grid: &GridSpec,
    settings: FdSettings,
) -> Result<Field> {
    let spatial = &grid.spatial;
    if spatial.dim() != 1 || u0.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: spatial.dim().max(u0.dim()),
        });
    }
    if !(nu > 0.0) || settings.refinement == 0 || !(settings.cfl > 0.0) {
        return Err(Error::InvalidParameter(
            "need ν > 0, refinement ≥ 1 and CFL > 0".into(),
        ));
    }
    let r = settings.refinement;
    let n_coarse = spatial.nodes_per_axis();
    let fine = SpatialGrid::new(1, spatial.radius(), r * (n_coarse - 1) + 1)?;
    let h = fine.spacing();
    let mut u = fine.sample(|x| u0.density(x));
    let u_max = u.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let limit = settings.cfl * (h * h / nu).min(h / u_max);

    let coarse_dt = grid.dt();
    let substeps = match settings.dt {
        Some(dt) => {
            if !(dt > 0.0) || dt > limit {
                return Err(Error::CflViolation { dt, limit });
            }
            let k = (coarse_dt / dt).round().max(1.0);
            if ((coarse_dt / dt) - k).abs() > 1e-9 * k {
                return Err(Error::InvalidParameter(format!(
                    "requested step {dt} does not divide the output spacing {coarse_dt}"
                )));
            }
            k as usize
        }
        None => (coarse_dt / limit).ceil().max(1.0) as usize,
    };
    let dt = coarse_dt / substeps as f64;

    let mut out = Field::zeros(grid.clone());
    let restrict = |u: &[f64]| -> Vec<f64> { (0..n_coarse).map(|i| u[r * i]).collect() };
    out.set_level(0, &restrict(&u));

    let n = u.len();
    let mut flux = vec![0.0; n + 1];
    let mut rhs = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let half_nu_over_h = 0.5 * nu / h;
    let eval = |u: &[f64], flux: &mut [f64], rhs: &mut [f64]| {
        flux[0] = 0.0;
        flux[n] = 0.0;
        for i in 0..n - 1 {
            flux[i + 1] =
                0.25 * (u[i] * u[i] + u[i + 1] * u[i + 1]) - half_nu_over_h * (u[i + 1] - u[i]);
        }
        for i in 0..n {
            rhs[i] = -(flux[i + 1] - flux[i]) / h;
        }
    };
    for level in 1..grid.levels() {
        for _ in 0..substeps {
            eval(&u, &mut flux, &mut rhs);
            for i in 0..n {
                stage[i] = u[i] + dt * rhs[i];
            }
            eval(&stage, &mut flux, &mut rhs);
            for i in 0..n {
                u[i] = 0.5 * u[i] + 0.5 * (stage[i] + dt * rhs[i]);
            }
        }
        out.set_level(level, &restrict(&u));
    }
    Ok(out)
}

/// Mass `h Σ uᵢ` of a one-dimensional level, the quantity the finite-volume
/// scheme conserves.
pub fn cell_mass(spatial: &SpatialGrid, values: &[f64]) -> f64 {
    spatial.spacing() * values.iter().sum::<f64>()
}
