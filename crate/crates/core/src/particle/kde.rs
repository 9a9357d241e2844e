//! Weighted Gaussian kernel density estimates on a grid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{fmt_num, SpatialGrid};

/// Kernel half-width in bandwidths; the dropped tail is below `e^{-32}`.
const WINDOW: f64 = 8.0;
/// Particles per reduction chunk. Fixed so sums do not depend on the thread count.
const CHUNK: usize = 2048;

/// Bandwidth selection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Bandwidth {
    /// `h = σ̂ (4 / ((d+2) N_eff))^{1/(d+4)}`, `N_eff = (Σw)²/Σw²`.
    #[default]
    Silverman,
    /// Silverman's value times a factor.
    ScaledSilverman(f64),
    Fixed(f64),
}

impl Bandwidth {
    /// Resolves the bandwidth for `positions` (`count × dim`, row-major) and
    /// unnormalized weights.
    pub fn resolve(&self, positions: &[f64], weights: &[f64], dim: usize) -> Result<f64> {
        let h = match *self {
            Self::Fixed(h) => h,
            Self::Silverman => silverman(positions, weights, dim),
            Self::ScaledSilverman(c) => c * silverman(positions, weights, dim),
        };
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be positive, got {h}"
            )));
        }
        Ok(h)
    }
}

/// `(Σw)² / Σw²`.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

fn silverman(positions: &[f64], weights: &[f64], dim: usize) -> f64 {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return f64::NAN;
    }
    let mut var_sum = 0.0;
    for a in 0..dim {
        let mean: f64 = weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * positions[i * dim + a])
            .sum::<f64>()
            / total;
        let var: f64 = weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (positions[i * dim + a] - mean).powi(2))
            .sum::<f64>()
            / total;
        var_sum += var;
    }
    let sigma = (var_sum / dim as f64).sqrt();
    let n_eff = effective_sample_size(weights);
    sigma * (4.0 / ((dim as f64 + 2.0) * n_eff)).powf(1.0 / (dim as f64 + 4.0))
}

/// A weighted KDE sampled on a spatial grid.
#[derive(Debug, Clone)]
pub struct DensityEstimate {
    pub level: usize,
    pub time: f64,
    pub bandwidth: f64,
    pub grid: SpatialGrid,
    pub values: Vec<f64>,
}

impl DensityEstimate {
    /// Trapezoid integral over the box.
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    /// Same columns as a field CSV: `t,x1,..,xd,value`.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim();
        let mut s = String::from("t");
        for a in 1..=d {
            s.push_str(&format!(",x{a}"));
        }
        s.push_str(",value\n");
        let t = fmt_num(self.time);
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&t);
            for x in self.grid.coords(i) {
                s.push(',');
                s.push_str(&fmt_num(x));
            }
            s.push(',');
            s.push_str(&fmt_num(*v));
            s.push('\n');
        }
        s
    }
}

/// Nodes along one axis within the kernel window of `y`, with unnormalized
/// Gaussian factors `exp(−(xⱼ − y)²/(2h²))` from a multiplicative recurrence.
fn axis_factors(grid: &SpatialGrid, y: f64, h: f64, out: &mut Vec<f64>) -> Option<usize> {
    let n = grid.nodes_per_axis();
    let dx = grid.spacing();
    let r = grid.radius();
    let lo = ((y - WINDOW * h + r) / dx).ceil().max(0.0);
    let hi = ((y + WINDOW * h + r) / dx).floor().min((n - 1) as f64);
    out.clear();
    if !(lo <= hi) {
        return None;
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let delta = dx / h;
    let mut u = (grid.axis_coord(lo) - y) / h;
    let mut g = (-0.5 * u * u).exp();
    let mut ratio = (-u * delta - 0.5 * delta * delta).exp();
    let step = (-delta * delta).exp();
    for j in lo..=hi {
        if (j - lo) % 32 == 31 {
            // refresh to keep the recurrence's rounding from accumulating
            u = (grid.axis_coord(j) - y) / h;
            g = (-0.5 * u * u).exp();
            ratio = (-u * delta - 0.5 * delta * delta).exp();
        }
        out.push(g);
        g *= ratio;
        ratio *= step;
    }
    Some(lo)
}

/// `Σᵢ wᵢ G_h(x − yᵢ) / count` at every grid node; `positions` is
/// `count × dim` row-major.
pub fn weighted_kde(grid: &SpatialGrid, positions: &[f64], weights: &[f64], h: f64) -> Vec<f64> {
    let d = grid.dim();
    let count = weights.len();
    let n = grid.nodes_per_axis();
    let total = grid.num_nodes();
    let norm = (2.0 * std::f64::consts::PI * h * h).powf(-0.5 * d as f64) / count.max(1) as f64;
    let partials: Vec<Vec<f64>> = (0..count)
        .collect::<Vec<_>>()
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; total];
            let mut factors: Vec<Vec<f64>> = vec![Vec::new(); d];
            let mut starts = vec![0usize; d];
            'particles: for &i in chunk {
                let w = weights[i];
                if w == 0.0 {
                    continue;
                }
                for a in 0..d {
                    match axis_factors(grid, positions[i * d + a], h, &mut factors[a]) {
                        Some(s) => starts[a] = s,
                        None => continue 'particles,
                    }
                }
                if d == 1 {
                    for (k, g) in factors[0].iter().enumerate() {
                        acc[starts[0] + k] += w * g;
                    }
                    continue;
                }
                // tensor product over the window
                let mut idx = vec![0usize; d];
                loop {
                    let mut flat = 0usize;
                    let mut val = w;
                    for a in 0..d {
                        flat = flat * n + starts[a] + idx[a];
                        val *= factors[a][idx[a]];
                    }
                    acc[flat] += val;
                    let mut a = d;
                    loop {
                        if a == 0 {
                            continue 'particles;
                        }
                        a -= 1;
                        idx[a] += 1;
                        if idx[a] < factors[a].len() {
                            break;
                        }
                        idx[a] = 0;
                    }
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; total];
    for part in &partials {
        for (o, p) in out.iter_mut().zip(part) {
            *o += p;
        }
    }
    for o in out.iter_mut() {
        *o *= norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(x: f64, h: f64) -> f64 {
        (-0.5 * x * x / (h * h)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * h)
    }

    #[test]
    fn single_particle_gives_the_kernel() {
        let g = SpatialGrid::new(1, 4.0, 401).unwrap();
        let h = 0.3;
        let est = weighted_kde(&g, &[0.0], &[1.0], h);
        for (i, v) in est.iter().enumerate() {
            let x = g.axis_coord(i);
            let exact = if x.abs() <= WINDOW * h {
                gauss(x, h)
            } else {
                0.0
            };
            assert!((v - exact).abs() < 1e-13, "{x}: {v} vs {exact}");
        }
    }

    #[test]
    fn two_dimensional_kernel_is_a_product() {
        let g = SpatialGrid::new(2, 3.0, 61).unwrap();
        let h = 0.4;
        let est = weighted_kde(&g, &[0.5, -0.2], &[2.0], h);
        for flat in (0..g.num_nodes()).step_by(97) {
            let x = g.coords(flat);
            let exact = 2.0 * gauss(x[0] - 0.5, h) * gauss(x[1] + 0.2, h);
            assert!((est[flat] - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn silverman_for_unit_weights() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 / 999.0 - 0.5) * 2.0).collect();
        let w = vec![1.0; 1000];
        let mean = 0.0;
        let var: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 1000.0;
        let expect = var.sqrt() * (4.0f64 / 3000.0).powf(0.2);
        let h = Bandwidth::Silverman.resolve(&xs, &w, 1).unwrap();
        assert!((h - expect).abs() < 1e-12);
        assert_eq!(effective_sample_size(&w), 1000.0);
        assert!(Bandwidth::Fixed(0.0).resolve(&xs, &w, 1).is_err());
    }
}
