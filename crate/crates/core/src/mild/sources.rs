//! Coefficients feeding the Picard map: the nonlinear problem coefficients or
//! frozen space-time fields.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::problem::ProblemSpec;

/// `Λ` and `b` as seen by the mild solver at one space-time node.
pub trait SourceTerms: Sync {
    fn dim(&self) -> usize;

    /// Returns `Λ` and writes `b` for density value `w` at global time level
    /// `level` (time `t`) and flat node `node` (coordinates `x`).
    fn coefficients(
        &self,
        level: usize,
        t: f64,
        node: usize,
        x: &[f64],
        w: f64,
        drift: &mut [f64],
    ) -> f64;
}

/// `Λ(t,x,w)` and `b(t,x,w)` of a problem.
#[derive(Debug, Clone, Copy)]
pub struct NonlinearSources<'a>(pub &'a ProblemSpec);

impl SourceTerms for NonlinearSources<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    fn coefficients(
        &self,
        _level: usize,
        t: f64,
        _node: usize,
        x: &[f64],
        w: f64,
        drift: &mut [f64],
    ) -> f64 {
        self.0.interaction_drift(t, x, w, drift);
        self.0.growth(t, x, w)
    }
}

/// Coefficients `b̂(t,x)`, `Λ̂(t,x)` that ignore the density value.
#[derive(Debug, Clone, Copy)]
pub struct FrozenSources<'a> {
    drift: &'a [Field],
    growth: &'a Field,
}

impl<'a> FrozenSources<'a> {
    /// `drift` holds one field per axis.
    pub fn new(drift: &'a [Field], growth: &'a Field) -> Result<Self> {
        let dim = growth.grid().spatial.dim();
        if drift.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: drift.len(),
            });
        }
        for f in drift {
            if !f.grid().same_mesh(growth.grid()) {
                return Err(Error::GridMismatch(
                    "frozen drift and growth fields live on different grids".into(),
                ));
            }
        }
        Ok(Self { drift, growth })
    }

    pub fn growth_field(&self) -> &Field {
        self.growth
    }

    pub fn drift_fields(&self) -> &[Field] {
        self.drift
    }

    /// `sup |b̂|` (Euclidean norm per node).
    pub fn drift_bound(&self) -> f64 {
        let n = self.growth.values().len();
        (0..n)
            .map(|i| {
                self.drift
                    .iter()
                    .map(|f| f.values()[i].powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn growth_bound(&self) -> f64 {
        self.growth.sup_norm()
    }
}

impl SourceTerms for FrozenSources<'_> {
    fn dim(&self) -> usize {
        self.drift.len()
    }

    #[inline]
    fn coefficients(
        &self,
        level: usize,
        _t: f64,
        node: usize,
        _x: &[f64],
        _w: f64,
        drift: &mut [f64],
    ) -> f64 {
        for (d, f) in drift.iter_mut().zip(self.drift) {
            *d = f.level(level)[node];
        }
        self.growth.level(level)[node]
    }
}
