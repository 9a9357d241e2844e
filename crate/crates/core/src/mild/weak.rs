//! Weak-form residual of a space-time field.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::problem::{ProblemSpec, TestFunction};
use crate::quadrature::trapezoid_weights;

/// `|∫φ u(t) − ∫φ u₀ − ∫₀ᵗ ∫ u(s,x) (L_sφ + b(s,x,u)·∇φ + Λ(s,x,u) φ)(x) dx ds|`.
///
/// `t` is snapped to the nearest time level; space integrals use the grid's
/// trapezoid rule and the time integral the trapezoid rule over levels. The
/// initial term uses the problem's `u₀`, not the field's first level.
pub fn weak_residual(
    u: &Field,
    phi: &dyn TestFunction,
    t: f64,
    problem: &ProblemSpec,
) -> Result<f64> {
    let grid = u.grid();
    let spatial = &grid.spatial;
    let d = spatial.dim();
    if d != problem.dim() || phi.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: d,
        });
    }
    if !(0.0..=grid.horizon * (1.0 + 1e-12)).contains(&t) {
        return Err(Error::InvalidTimes(format!(
            "0 ≤ t ≤ {}, got {t}",
            grid.horizon
        )));
    }
    let k_end = grid.nearest_level(t);
    let n = spatial.num_nodes();
    let weights = spatial.quadrature_weights();

    let mut x = vec![0.0; d];
    let mut values = vec![0.0; n];
    let mut grads = vec![0.0; n * d];
    let mut u0 = vec![0.0; n];
    for node in 0..n {
        spatial.coords_into(node, &mut x);
        values[node] = phi.value(&x);
        phi.gradient(&x, &mut grads[node * d..(node + 1) * d]);
        u0[node] = problem.initial().density(&x);
    }
    let generator = |time: f64| -> Vec<f64> {
        let mut x = vec![0.0; d];
        (0..n)
            .map(|node| {
                spatial.coords_into(node, &mut x);
                problem.apply_generator(phi, time, &x)
            })
            .collect()
    };
    let homogeneous = problem.kernel().is_time_homogeneous();
    let fixed_generator = homogeneous.then(|| generator(0.0));

    let pair = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(&weights)
            .map(|((p, q), w)| p * q * w)
            .sum()
    };
    let lhs = pair(&values, u.level(k_end));
    let initial = pair(&values, &u0);

    let time_w = trapezoid_weights(k_end + 1, grid.dt());
    let mut b = vec![0.0; d];
    let mut integral = 0.0;
    for (k, wt) in time_w.iter().enumerate().take(k_end + 1) {
        if k_end == 0 {
            break;
        }
        let s = grid.time(k);
        let owned;
        let lphi = match &fixed_generator {
            Some(g) => g,
            None => {
                owned = generator(s);
                &owned
            }
        };
        let level = u.level(k);
        let mut inner = 0.0;
        for node in 0..n {
            let z = level[node];
            if z == 0.0 {
                continue;
            }
            spatial.coords_into(node, &mut x);
            problem.interaction_drift(s, &x, z, &mut b);
            let lam = problem.growth(s, &x, z);
            let g = &grads[node * d..(node + 1) * d];
            let transport: f64 = b.iter().zip(g).map(|(bi, gi)| bi * gi).sum();
            inner += weights[node] * z * (lphi[node] + transport + lam * values[node]);
        }
        integral += wt * inner;
    }
    Ok((lhs - initial - integral).abs())
}
