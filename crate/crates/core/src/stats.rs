//! Ensemble statistics: online means and co-moments, moment time series,
//! window averages and comparison against analytic moments.

use serde::Serialize;
use thiserror::Error;

use crate::distributions::MomentSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("no samples accumulated")]
    Empty,
    #[error("variance needs at least two samples, have {count}")]
    VarianceUnavailable { count: u64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("record time {t} does not follow {previous}")]
    NonIncreasingTime { previous: f64, t: f64 },
    #[error("no records in window [{from}, {to}]")]
    EmptyWindow { from: f64, to: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Divide by `n`; the moments are expectations over the ensemble.
    #[default]
    Population,
    /// Divide by `n - 1`.
    Sample,
}

/// Upper triangle (diagonal included), row by row.
fn upper_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

fn upper_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // Rows 0..i contribute dim + (dim-1) + ... + (dim-i+1) entries.
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Single-pass accumulator of means and co-moments (Welford update, Chan merge).
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineMoments {
    dim: usize,
    count: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
    delta: Vec<f64>,
}

impl OnlineMoments {
    pub fn new(dim: usize) -> Self {
        Self { dim, count: 0, mean: vec![0.0; dim], comoment: vec![0.0; upper_len(dim)], delta: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn accumulate(&mut self, x: &[f64]) -> Result<(), StatsError> {
        if x.len() != self.dim {
            return Err(StatsError::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        self.count += 1;
        let n = self.count as f64;
        for i in 0..self.dim {
            self.delta[i] = x[i] - self.mean[i];
            self.mean[i] += self.delta[i] / n;
        }
        let mut idx = 0;
        for i in 0..self.dim {
            let di = self.delta[i];
            for j in i..self.dim {
                self.comoment[idx] += di * (x[j] - self.mean[j]);
                idx += 1;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &OnlineMoments) -> Result<(), StatsError> {
        if other.dim != self.dim {
            return Err(StatsError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        if other.count == 0 {
            return Ok(());
        }
        if self.count == 0 {
            *self = other.clone();
            return Ok(());
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for i in 0..self.dim {
            self.delta[i] = other.mean[i] - self.mean[i];
        }
        let w = na * nb / n;
        let mut idx = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                self.comoment[idx] += other.comoment[idx] + self.delta[i] * self.delta[j] * w;
                idx += 1;
            }
        }
        for i in 0..self.dim {
            self.mean[i] += self.delta[i] * nb / n;
        }
        self.count += other.count;
        Ok(())
    }

    /// Pairwise-tree reduction in the given order; the result depends only on
    /// the sequence of parts, not on how they were produced.
    pub fn merge_tree(mut parts: Vec<OnlineMoments>) -> Option<OnlineMoments> {
        while parts.len() > 1 {
            let mut next = Vec::with_capacity(parts.len().div_ceil(2));
            let mut it = parts.into_iter();
            while let Some(mut a) = it.next() {
                if let Some(b) = it.next() {
                    a.merge(&b).ok()?;
                }
                next.push(a);
            }
            parts = next;
        }
        parts.pop()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn finalize(&self, t: f64) -> Result<MomentRecord, StatsError> {
        self.finalize_with(t, Normalization::Population)
    }

    /// A record; with a single sample only the means are available.
    pub fn finalize_with(&self, t: f64, norm: Normalization) -> Result<MomentRecord, StatsError> {
        if self.count == 0 {
            return Err(StatsError::Empty);
        }
        let n = self.count as f64;
        let divisor = match norm {
            Normalization::Population => n,
            Normalization::Sample => n - 1.0,
        };
        let (cov, se) = if self.count >= 2 {
            let mut cov: Vec<f64> = self.comoment.iter().map(|c| c / divisor).collect();
            for i in 0..self.dim {
                let d = upper_index(self.dim, i, i);
                cov[d] = cov[d].max(0.0);
            }
            let se = (0..self.dim).map(|i| (cov[upper_index(self.dim, i, i)] / n).sqrt()).collect();
            (Some(cov), Some(se))
        } else {
            (None, None)
        };
        Ok(MomentRecord { t, count: self.count, mean: self.mean.clone(), cov, se })
    }
}

/// Ensemble moments at one time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRecord {
    pub t: f64,
    pub count: u64,
    pub mean: Vec<f64>,
    /// Upper triangle including the diagonal, row by row.
    pub cov: Option<Vec<f64>>,
    /// Standard errors of the means.
    pub se: Option<Vec<f64>>,
}

impl MomentRecord {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn covariance(&self, i: usize, j: usize) -> Result<f64, StatsError> {
        self.cov
            .as_ref()
            .map(|c| c[upper_index(self.dim(), i, j)])
            .ok_or(StatsError::VarianceUnavailable { count: self.count })
    }

    pub fn variance(&self, i: usize) -> Result<f64, StatsError> {
        self.covariance(i, i)
    }

    pub fn standard_error(&self, i: usize) -> Result<f64, StatsError> {
        self.se.as_ref().map(|s| s[i]).ok_or(StatsError::VarianceUnavailable { count: self.count })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MomentTimeSeries {
    records: Vec<MomentRecord>,
}

impl MomentTimeSeries {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, rec: MomentRecord) -> Result<(), StatsError> {
        if let Some(last) = self.records.last() {
            if rec.dim() != last.dim() {
                return Err(StatsError::DimensionMismatch { expected: last.dim(), found: rec.dim() });
            }
            if !(rec.t > last.t) {
                return Err(StatsError::NonIncreasingTime { previous: last.t, t: rec.t });
            }
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn records(&self) -> &[MomentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&MomentRecord> {
        self.records.last()
    }

    pub fn window_average(&self, from: f64, to: f64) -> Result<MomentRecord, StatsError> {
        window_average(self, from, to)
    }
}

/// Arithmetic average of the records with `from <= t <= to` (a relative slack of
/// `1e-9` absorbs accumulated round-off in the record times). The standard errors
/// treat the records as independent.
pub fn window_average(ts: &MomentTimeSeries, from: f64, to: f64) -> Result<MomentRecord, StatsError> {
    let slack = 1e-9 * from.abs().max(to.abs()).max(1.0);
    let inside: Vec<&MomentRecord> = ts.records.iter().filter(|r| r.t >= from - slack && r.t <= to + slack).collect();
    let Some(first) = inside.first() else {
        return Err(StatsError::EmptyWindow { from, to });
    };
    let m = inside.len() as f64;
    let dim = first.dim();
    let avg = |get: &dyn Fn(&MomentRecord) -> Option<&Vec<f64>>| -> Option<Vec<f64>> {
        let mut acc = vec![0.0; get(first)?.len()];
        for r in &inside {
            for (a, v) in acc.iter_mut().zip(get(r)?) {
                *a += v;
            }
        }
        Some(acc.into_iter().map(|a| a / m).collect())
    };
    let mean = avg(&|r| Some(&r.mean)).expect("means always present");
    let cov = avg(&|r| r.cov.as_ref());
    let se = avg(&|r| r.se.as_ref()).map(|s| s.into_iter().map(|v| v / m.sqrt()).collect());
    debug_assert_eq!(mean.len(), dim);
    Ok(MomentRecord { t: inside.last().map_or(first.t, |r| r.t), count: first.count, mean, cov, se })
}

/// Relative tolerances used by [`compare`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub mean_rel: f64,
    pub var_rel: f64,
    pub cov_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { mean_rel: 0.05, var_rel: 0.05, cov_rel: 0.10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantityCheck {
    pub name: String,
    pub analytic: f64,
    pub empirical: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    /// Deviation in units of the standard error, for means.
    pub se_multiple: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub checks: Vec<QuantityCheck>,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn failures(&self) -> impl Iterator<Item = &QuantityCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

fn check(name: String, analytic: f64, empirical: f64, tolerance: f64, se: Option<f64>) -> QuantityCheck {
    let abs_dev = (empirical - analytic).abs();
    let rel_dev = if analytic != 0.0 { abs_dev / analytic.abs() } else { abs_dev };
    QuantityCheck {
        name,
        analytic,
        empirical,
        abs_dev,
        rel_dev,
        se_multiple: se.filter(|s| *s > 0.0).map(|s| abs_dev / s),
        tolerance,
        pass: rel_dev <= tolerance,
    }
}

/// Compares the first `analytic.dim()` components of `rec` against `analytic`.
/// Missing second moments count as failures.
pub fn compare(rec: &MomentRecord, analytic: &MomentSet, tol: &Tolerances) -> Result<ComparisonReport, StatsError> {
    let k = analytic.dim();
    if rec.dim() < k {
        return Err(StatsError::DimensionMismatch { expected: k, found: rec.dim() });
    }
    let mut checks = Vec::new();
    for i in 0..k {
        let se = rec.standard_error(i).ok();
        checks.push(check(format!("mean_{}", i + 1), analytic.mean()[i], rec.mean[i], tol.mean_rel, se));
    }
    for i in 0..k {
        let emp = rec.variance(i).unwrap_or(f64::NAN);
        checks.push(check(format!("var_{}", i + 1), analytic.variance(i), emp, tol.var_rel, None));
    }
    for i in 0..k {
        for j in i + 1..k {
            let emp = rec.covariance(i, j).unwrap_or(f64::NAN);
            checks.push(check(format!("cov_{}_{}", i + 1, j + 1), analytic.cov(i, j), emp, tol.cov_rel, None));
        }
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(ComparisonReport { checks, pass })
}

/// Compares only the means, for processes whose stationary second moments are
/// not available in closed form.
pub fn compare_means(rec: &MomentRecord, mean: &[f64], tol: &Tolerances) -> Result<ComparisonReport, StatsError> {
    if rec.dim() < mean.len() {
        return Err(StatsError::DimensionMismatch { expected: mean.len(), found: rec.dim() });
    }
    let checks: Vec<QuantityCheck> = mean
        .iter()
        .enumerate()
        .map(|(i, &m)| check(format!("mean_{}", i + 1), m, rec.mean[i], tol.mean_rel, rec.standard_error(i).ok()))
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    Ok(ComparisonReport { checks, pass })
}
