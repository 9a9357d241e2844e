//! Cross-method error norms and tolerance checks.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{fmt_num, Field};

/// One Monte-Carlo functional compared with a deterministic reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZScore {
    pub label: String,
    pub seed: u64,
    pub t: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub reference: f64,
    pub z: f64,
}

impl ZScore {
    pub fn new(
        label: impl Into<String>,
        seed: u64,
        t: f64,
        estimate: f64,
        standard_error: f64,
        reference: f64,
    ) -> Self {
        let gap = estimate - reference;
        let z = if standard_error > 0.0 {
            gap / standard_error
        } else if gap.abs() <= 1e-12 * reference.abs().max(1.0) {
            0.0
        } else {
            f64::INFINITY.copysign(gap)
        };
        Self {
            label: label.into(),
            seed,
            t,
            estimate,
            standard_error,
            reference,
            z,
        }
    }
}

/// A tolerance check: passes iff `value <= limit`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            pass: value >= limit,
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            value: if pass { 1.0 } else { 0.0 },
            limit: 1.0,
            pass,
        }
    }
}

/// Per-time distances, z-scores and tolerance checks.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub l1: Vec<f64>,
    pub linf: Vec<f64>,
    pub z_scores: Vec<ZScore>,
    pub checks: Vec<Check>,
}

impl ComparisonReport {
    /// True iff every check passed.
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    /// Checks `l1` at the listed times, or at every time if `times` is empty.
    pub fn check_l1(&mut self, limit: f64, times: &[f64]) {
        let worst = self.worst(&self.l1, times);
        self.push(Check::at_most("l1", worst, limit));
    }

    pub fn check_linf(&mut self, limit: f64, times: &[f64]) {
        let worst = self.worst(&self.linf, times);
        self.push(Check::at_most("linf", worst, limit));
    }

    fn worst(&self, values: &[f64], times: &[f64]) -> f64 {
        self.times
            .iter()
            .zip(values)
            .filter(|(t, _)| times.is_empty() || times.iter().any(|s| (*t - s).abs() <= 1e-9))
            .map(|(_, v)| *v)
            .fold(0.0, f64::max)
    }

    /// Distance at time `t`, if compared.
    pub fn l1_at(&self, t: f64) -> Option<f64> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-9)
            .map(|i| self.l1[i])
    }

    /// Fraction of z-scores with `|z| <= limit`.
    pub fn z_pass_fraction(&self, limit: f64) -> f64 {
        if self.z_scores.is_empty() {
            return 1.0;
        }
        self.z_scores.iter().filter(|z| z.z.abs() <= limit).count() as f64
            / self.z_scores.len() as f64
    }

    /// Columns `t,l1,linf`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,l1,linf\n");
        for ((t, a), b) in self.times.iter().zip(&self.l1).zip(&self.linf) {
            let _ = writeln!(s, "{},{},{}", fmt_num(*t), fmt_num(*a), fmt_num(*b));
        }
        s
    }

    /// Columns `label,seed,t,estimate,standard_error,reference,z`.
    pub fn z_scores_csv(&self) -> String {
        let mut s = String::from("label,seed,t,estimate,standard_error,reference,z\n");
        for z in &self.z_scores {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                z.label,
                z.seed,
                fmt_num(z.t),
                fmt_num(z.estimate),
                fmt_num(z.standard_error),
                fmt_num(z.reference),
                fmt_num(z.z)
            );
        }
        s
    }

    /// Summary of checks and distances (z-scores go to their own CSV).
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            pass: bool,
            times: &'a [f64],
            l1: &'a [f64],
            linf: &'a [f64],
            z_score_count: usize,
            checks: &'a [Check],
        }
        toml::to_string(&Summary {
            pass: self.pass(),
            times: &self.times,
            l1: &self.l1,
            linf: &self.linf,
            z_score_count: self.z_scores.len(),
            checks: &self.checks,
        })
        .unwrap_or_default()
    }
}

/// L¹ (trapezoid) and L∞ distances between level `ka` of `a` and level `kb`
/// of `b` on a shared spatial grid.
pub fn level_distance(a: &Field, ka: usize, b: &Field, kb: usize) -> Result<(f64, f64)> {
    let spatial = &a.grid().spatial;
    if *spatial != b.grid().spatial {
        return Err(Error::GridMismatch(
            "fields live on different spatial grids".into(),
        ));
    }
    let diff: Vec<f64> = a
        .level(ka)
        .iter()
        .zip(b.level(kb))
        .map(|(x, y)| (x - y).abs())
        .collect();
    let linf = diff.iter().copied().fold(0.0, f64::max);
    Ok((spatial.integrate(&diff), linf))
}

/// Distances at every time level of two fields on the same mesh.
pub fn compare_fields(a: &Field, b: &Field) -> Result<ComparisonReport> {
    if !a.grid().same_mesh(b.grid()) {
        return Err(Error::GridMismatch(format!(
            "{:?} vs {:?}",
            a.grid(),
            b.grid()
        )));
    }
    let mut report = ComparisonReport::default();
    for k in 0..a.grid().levels() {
        let (l1, linf) = level_distance(a, k, b, k)?;
        report.times.push(a.grid().time(k));
        report.l1.push(l1);
        report.linf.push(linf);
    }
    Ok(report)
}

/// Distances at the given times, which must lie on both time grids.
pub fn compare_at_times(a: &Field, b: &Field, times: &[f64]) -> Result<ComparisonReport> {
    let mut report = ComparisonReport::default();
    for &t in times {
        let ka = a.grid().level_of(t).ok_or(Error::MissingLevel(t))?;
        let kb = b.grid().level_of(t).ok_or(Error::MissingLevel(t))?;
        let (l1, linf) = level_distance(a, ka, b, kb)?;
        report.times.push(t);
        report.l1.push(l1);
        report.linf.push(linf);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridSpec, SpatialGrid};

    fn field(shift: f64) -> Field {
        let g = GridSpec::new(SpatialGrid::new(1, 4.0, 801).unwrap(), 1.0, 4).unwrap();
        Field::from_fn(g, |_, x| if x[0].abs() <= 1.0 { 0.5 + shift } else { 0.0 })
    }

    #[test]
    fn identical_fields_have_zero_distance() {
        let a = field(0.0);
        let r = compare_fields(&a, &a).unwrap();
        assert_eq!(r.times.len(), 5);
        assert!(r.l1.iter().chain(&r.linf).all(|v| *v == 0.0));
    }

    #[test]
    fn constant_offset_on_the_support() {
        let r = compare_fields(&field(0.0), &field(0.01)).unwrap();
        for (l1, linf) in r.l1.iter().zip(&r.linf) {
            // the trapezoid rule counts one extra cell at the jumps
            assert!((l1 - 0.02).abs() <= 0.01 * 0.01 + 1e-12, "{l1}");
            assert!((linf - 0.01).abs() < 1e-15);
        }
        let mut r = r;
        r.check_l1(0.03, &[]);
        r.check_linf(0.005, &[0.5]);
        assert!(r.checks[0].pass && !r.checks[1].pass && !r.pass());
        assert!(r.to_csv().starts_with("t,l1,linf\n"));
        assert_eq!(r.to_csv().lines().count(), 6);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let g = GridSpec::new(SpatialGrid::new(1, 4.0, 11).unwrap(), 1.0, 4).unwrap();
        assert!(compare_fields(&field(0.0), &Field::zeros(g)).is_err());
    }

    #[test]
    fn z_scores() {
        assert_eq!(ZScore::new("c", 0, 1.0, 2.0, 0.0, 2.0).z, 0.0);
        assert_eq!(ZScore::new("c", 0, 1.0, 2.5, 0.0, 2.0).z, f64::INFINITY);
        assert_eq!(ZScore::new("c", 0, 1.0, 2.5, 0.25, 2.0).z, 2.0);
    }
}
