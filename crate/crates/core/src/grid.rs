//! Truncated space-time grids and the fields that live on them.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::quadrature::trapezoid_weights;

/// Uniform tensor grid on the box `[-R, R]^d`, `n` nodes per axis, both
/// endpoints included. Node multi-indices are flattened row-major (last axis
/// fastest). Fields are implicitly zero outside the box.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    dim: usize,
    radius: f64,
    nodes_per_axis: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, radius: f64, nodes_per_axis: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box radius must be positive, got {radius}"
            )));
        }
        if nodes_per_axis < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 nodes per axis, got {nodes_per_axis}"
            )));
        }
        Ok(Self {
            dim,
            radius,
            nodes_per_axis,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_per_axis.pow(self.dim as u32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.nodes_per_axis - 1) as f64
    }

    /// Coordinate of node `i` along one axis.
    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.radius + i as f64 * self.spacing()
    }

    pub fn axis_coords(&self) -> Vec<f64> {
        (0..self.nodes_per_axis)
            .map(|i| self.axis_coord(i))
            .collect()
    }

    /// Writes the coordinates of flat node `flat` into `out`.
    pub fn coords_into(&self, flat: usize, out: &mut [f64]) {
        let n = self.nodes_per_axis;
        let mut rem = flat;
        for a in (0..self.dim).rev() {
            out[a] = self.axis_coord(rem % n);
            rem /= n;
        }
    }

    pub fn coords(&self, flat: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.coords_into(flat, &mut out);
        out
    }

    /// Flat index of the node nearest to `x`, or `None` if `x` lies more than
    /// half a cell outside the box.
    pub fn nearest(&self, x: &[f64]) -> Option<usize> {
        let h = self.spacing();
        let n = self.nodes_per_axis;
        let mut flat = 0usize;
        for &xa in x.iter().take(self.dim) {
            let pos = ((xa + self.radius) / h).round();
            if !(pos >= 0.0 && pos <= (n - 1) as f64) {
                return None;
            }
            flat = flat * n + pos as usize;
        }
        Some(flat)
    }

    /// Tensor trapezoid weights, one per flat node.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let axis = trapezoid_weights(self.nodes_per_axis, self.spacing());
        let mut w = vec![1.0; self.num_nodes()];
        let n = self.nodes_per_axis;
        for (flat, wf) in w.iter_mut().enumerate() {
            let mut rem = flat;
            for _ in 0..self.dim {
                *wf *= axis[rem % n];
                rem /= n;
            }
        }
        w
    }

    /// Trapezoid integral of nodal values over the box.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.num_nodes());
        if self.dim == 1 {
            return crate::quadrature::trapezoid(values, self.spacing());
        }
        self.quadrature_weights()
            .iter()
            .zip(values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn l1_norm(&self, values: &[f64]) -> f64 {
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        self.integrate(&abs)
    }

    pub fn sample(&self, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        (0..self.num_nodes())
            .map(|i| {
                self.coords_into(i, &mut x);
                f(&x)
            })
            .collect()
    }
}

/// Space-time grid over `[0, T] × [-R, R]^d` with optional slab width `τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub spatial: SpatialGrid,
    pub horizon: f64,
    pub time_steps: usize,
    slab_steps: Option<usize>,
}

impl GridSpec {
    pub fn new(spatial: SpatialGrid, horizon: f64, time_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if time_steps == 0 {
            return Err(Error::InvalidGrid("need at least one time step".into()));
        }
        Ok(Self {
            spatial,
            horizon,
            time_steps,
            slab_steps: None,
        })
    }

    /// Fixes the slab width `τ`. It must divide `T` into `N` slabs, and each
    /// slab must span a whole number of time steps.
    pub fn with_slab_width(mut self, tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0 && tau <= self.horizon * (1.0 + 1e-12)) {
            return Err(Error::InvalidGrid(format!(
                "slab width τ = {tau} must lie in (0, T = {}]",
                self.horizon
            )));
        }
        let slabs = self.horizon / tau;
        let n_slabs = slabs.round();
        if (slabs - n_slabs).abs() > 1e-9 * slabs.max(1.0) {
            return Err(Error::InvalidGrid(format!(
                "slab width τ = {tau} does not divide T = {} (N·τ = T needs integer N, got {slabs})",
                self.horizon
            )));
        }
        let n_slabs = n_slabs as usize;
        if !self.time_steps.is_multiple_of(n_slabs) {
            return Err(Error::InvalidGrid(format!(
                "slab width τ = {tau} gives N = {n_slabs} slabs, which does not divide the {} time steps",
                self.time_steps
            )));
        }
        self.slab_steps = Some(self.time_steps / n_slabs);
        Ok(self)
    }

    pub fn with_slab_steps(mut self, steps: usize) -> Result<Self> {
        if steps == 0 || !self.time_steps.is_multiple_of(steps) {
            return Err(Error::InvalidGrid(format!(
                "slab of {steps} steps does not divide the {} time steps",
                self.time_steps
            )));
        }
        self.slab_steps = Some(steps);
        Ok(self)
    }

    pub fn slab_steps(&self) -> Option<usize> {
        self.slab_steps
    }

    pub fn slab_width(&self) -> Option<f64> {
        self.slab_steps.map(|s| s as f64 * self.dt())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.time_steps as f64
    }

    pub fn levels(&self) -> usize {
        self.time_steps + 1
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt()
    }

    /// Level whose time is closest to `t`.
    pub fn nearest_level(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.time_steps)
    }

    /// Level for `t` if `t` sits on the time grid.
    pub fn level_of(&self, t: f64) -> Option<usize> {
        let k = self.nearest_level(t);
        ((self.time(k) - t).abs() <= 1e-9 * self.dt()).then_some(k)
    }

    /// Same spatial box and time levels (slab choice is ignored).
    pub fn same_mesh(&self, other: &GridSpec) -> bool {
        self.spatial == other.spatial
            && self.time_steps == other.time_steps
            && (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon
    }
}

/// Real values on every (time level, spatial node) of a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: GridSpec) -> Self {
        let len = grid.levels() * grid.spatial.num_nodes();
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        let expected = grid.levels() * grid.spatial.num_nodes();
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(t, x)` at every grid point.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(f64, &[f64]) -> f64) -> Self {
        let mut field = Self::zeros(grid);
        let dim = field.grid.spatial.dim();
        let mut x = vec![0.0; dim];
        for k in 0..field.grid.levels() {
            let t = field.grid.time(k);
            let spatial = field.grid.spatial.clone();
            for (i, v) in field.level_mut(k).iter_mut().enumerate() {
                spatial.coords_into(i, &mut x);
                *v = f(t, &x);
            }
        }
        field
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.grid.spatial.num_nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn level_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.grid.spatial.num_nodes();
        &mut self.values[k * n..(k + 1) * n]
    }

    pub fn set_level(&mut self, k: usize, values: &[f64]) {
        self.level_mut(k).copy_from_slice(values);
    }

    /// Nearest-node value at `(level, x)`; zero outside the box.
    pub fn lookup(&self, level: usize, x: &[f64]) -> f64 {
        match self.grid.spatial.nearest(x) {
            Some(i) => self.level(level)[i],
            None => 0.0,
        }
    }

    pub fn mass(&self, level: usize) -> f64 {
        self.grid.spatial.integrate(self.level(level))
    }

    pub fn l1_at(&self, level: usize) -> f64 {
        self.grid.spatial.l1_norm(self.level(level))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Space-time norm `∫₀ᵀ ‖f(t,·)‖_{L¹} dt` (trapezoid in time).
    pub fn l1_norm(&self) -> f64 {
        let per_level: Vec<f64> = (0..self.grid.levels()).map(|k| self.l1_at(k)).collect();
        crate::quadrature::trapezoid(&per_level, self.grid.dt())
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise difference `self − other` on identical meshes.
    pub fn difference(&self, other: &Field) -> Result<Field> {
        if !self.grid.same_mesh(&other.grid) {
            return Err(Error::GridMismatch(format!(
                "{:?} vs {:?}",
                self.grid, other.grid
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field {
            grid: self.grid.clone(),
            values,
        })
    }

    /// CSV with header `t,x1,..,xd,value`, one row per grid point.
    pub fn to_csv(&self) -> String {
        self.to_csv_levels(&(0..self.grid.levels()).collect::<Vec<_>>())
    }

    /// As [`Field::to_csv`], restricted to the given time levels.
    pub fn to_csv_levels(&self, levels: &[usize]) -> String {
        let dim = self.grid.spatial.dim();
        let mut out = String::from("t");
        for a in 1..=dim {
            let _ = write!(out, ",x{a}");
        }
        out.push_str(",value\n");
        let mut x = vec![0.0; dim];
        for &k in levels {
            let t = self.grid.time(k);
            for (i, v) in self.level(k).iter().enumerate() {
                self.grid.spatial.coords_into(i, &mut x);
                out.push_str(&fmt_num(t));
                for xa in &x {
                    out.push(',');
                    out.push_str(&fmt_num(*xa));
                }
                out.push(',');
                out.push_str(&fmt_num(*v));
                out.push('\n');
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Fixed decimal rendering with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_node_and_outside() {
        let g = SpatialGrid::new(1, 1.0, 5).unwrap();
        assert_eq!(g.nearest(&[0.0]), Some(2));
        assert_eq!(g.nearest(&[0.26]), Some(3));
        assert_eq!(g.nearest(&[1.2]), Some(4));
        assert_eq!(g.nearest(&[1.3]), None);
        assert_eq!(g.nearest(&[-1.3]), None);
    }

    #[test]
    fn coords_are_row_major() {
        let g = SpatialGrid::new(2, 1.0, 3).unwrap();
        assert_eq!(g.coords(1), vec![-1.0, 0.0]);
        assert_eq!(g.coords(3), vec![0.0, -1.0]);
        assert_eq!(g.nearest(&[0.0, -1.0]), Some(3));
    }

    #[test]
    fn trapezoid_integrates_linear_exactly_in_2d() {
        let g = SpatialGrid::new(2, 1.0, 7).unwrap();
        let v = g.sample(|x| 1.0 + x[0] + 2.0 * x[1]);
        assert!((g.integrate(&v) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn slab_width_must_divide_horizon() {
        let g = GridSpec::new(SpatialGrid::new(1, 1.0, 4).unwrap(), 1.0, 64).unwrap();
        assert!(g.clone().with_slab_width(0.3).is_err());
        assert!(g.clone().with_slab_width(1.0 / 128.0).is_err());
        let g = g.with_slab_width(0.25).unwrap();
        assert_eq!(g.slab_steps(), Some(16));
        let err = GridSpec::new(SpatialGrid::new(1, 1.0, 4).unwrap(), 1.0, 64)
            .unwrap()
            .with_slab_width(0.3)
            .unwrap_err()
            .to_string();
        assert!(err.contains("does not divide T"), "{err}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let grid = GridSpec::new(SpatialGrid::new(1, 1.0, 3).unwrap(), 1.0, 1).unwrap();
        let f = Field::from_fn(grid, |t, x| t + x[0]);
        let csv = f.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,x1,value");
        assert_eq!(lines.len(), 1 + 6);
        assert_eq!(
            lines[6],
            "1.0000000000000000e0,1.0000000000000000e0,2.0000000000000000e0"
        );
    }
}
