//! Accuracy and coverage summaries across simulation replications.

use alloc::vec;
use alloc::vec::Vec;

use crate::band::ConfidenceBand;
use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::stats::RunningMoments;

/// `sqrt(mean_l (estimate[k, l] - truth[k, l])^2)` for covariate `k`.
pub fn rmise(estimate: &CoefficientField, truth: &CoefficientField, k: usize) -> Result<f64> {
    if !estimate.grid().same_as(truth.grid()) {
        return Err(Error::GridMismatch);
    }
    if estimate.dim() != truth.dim() {
        return Err(Error::Shape {
            what: "coefficient rows",
            expected: truth.dim(),
            found: estimate.dim(),
        });
    }
    if k >= truth.dim() {
        return Err(Error::Shape {
            what: "coefficient index",
            expected: truth.dim(),
            found: k,
        });
    }
    let m = truth.grid_len() as f64;
    let ss: f64 = estimate
        .row(k)
        .iter()
        .zip(truth.row(k))
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(libm::sqrt(ss / m))
}

/// RMISE of every coefficient row.
pub fn rmise_all(estimate: &CoefficientField, truth: &CoefficientField) -> Result<Vec<f64>> {
    (0..truth.dim()).map(|k| rmise(estimate, truth, k)).collect()
}

/// Fraction of replications whose band contains the truth, per cell
/// (row-major by covariate, like [`CoefficientField`]).
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    pub dim: usize,
    pub grid_len: usize,
    pub proportions: Vec<f64>,
    pub replications: usize,
}

impl CoverageMap {
    pub fn at(&self, j: usize, l: usize) -> f64 {
        self.proportions[j * self.grid_len + l]
    }

    /// Share of cells whose coverage lies within `tolerance` of `target`.
    pub fn fraction_within(&self, target: f64, tolerance: f64) -> f64 {
        let hits = self
            .proportions
            .iter()
            .filter(|p| (*p - target).abs() <= tolerance)
            .count();
        hits as f64 / self.proportions.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.proportions.iter().sum::<f64>() / self.proportions.len() as f64
    }
}

/// Tallies band hits cell by cell; bands can be added one replication at a time.
#[derive(Debug, Clone)]
pub struct CoverageCounter {
    dim: usize,
    grid_len: usize,
    hits: Vec<u64>,
    total: u64,
}

impl CoverageCounter {
    pub fn new(truth: &CoefficientField) -> Self {
        Self {
            dim: truth.dim(),
            grid_len: truth.grid_len(),
            hits: vec![0; truth.values().len()],
            total: 0,
        }
    }

    pub fn add(&mut self, band: &ConfidenceBand, truth: &CoefficientField) -> Result<()> {
        if !band.lower.same_shape(truth) || !band.upper.same_shape(truth) {
            return Err(Error::Shape {
                what: "band",
                expected: truth.values().len(),
                found: band.lower.values().len(),
            });
        }
        let cells = band.lower.values().iter().zip(band.upper.values());
        for ((h, (lo, hi)), t) in self.hits.iter_mut().zip(cells).zip(truth.values()) {
            if lo <= t && t <= hi {
                *h += 1;
            }
        }
        self.total += 1;
        Ok(())
    }

    /// Adds counts gathered elsewhere on the same shape.
    pub fn merge(&mut self, other: &CoverageCounter) {
        assert_eq!(self.hits.len(), other.hits.len());
        for (a, b) in self.hits.iter_mut().zip(&other.hits) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn finish(&self) -> Result<CoverageMap> {
        if self.total == 0 {
            return Err(Error::Empty("coverage replications"));
        }
        let n = self.total as f64;
        Ok(CoverageMap {
            dim: self.dim,
            grid_len: self.grid_len,
            proportions: self.hits.iter().map(|h| *h as f64 / n).collect(),
            replications: self.total as usize,
        })
    }
}

pub fn coverage(bands: &[ConfidenceBand], truth: &CoefficientField) -> Result<CoverageMap> {
    let mut counter = CoverageCounter::new(truth);
    for b in bands {
        counter.add(b, truth)?;
    }
    counter.finish()
}

/// Mean and unbiased standard deviation of RMISE per coefficient.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicationSummary {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub count: usize,
    /// Set when only one replication was available and `sd` is zero by convention.
    pub single_replication: bool,
}

/// `per_replication[r][k]` is the RMISE of coefficient `k` in replication `r`.
pub fn summarize(per_replication: &[Vec<f64>]) -> Result<ReplicationSummary> {
    let first = per_replication.first().ok_or(Error::Empty("replications"))?;
    let d = first.len();
    if let Some(bad) = per_replication.iter().find(|r| r.len() != d) {
        return Err(Error::Shape {
            what: "replication row",
            expected: d,
            found: bad.len(),
        });
    }
    let count = per_replication.len();
    let mut moments = vec![RunningMoments::new(); d];
    for row in per_replication {
        for (acc, v) in moments.iter_mut().zip(row) {
            acc.push(*v);
        }
    }
    let mean = moments.iter().map(RunningMoments::mean).collect();
    let sd = moments.iter().map(RunningMoments::std_dev).collect();
    Ok(ReplicationSummary {
        mean,
        sd,
        count,
        single_replication: count == 1,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic `sup_t |F_a(t) - F_b(t)|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("ks sample"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut best: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let t = if a[i] <= b[j] { a[i] } else { b[j] };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        best = best.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::band::symmetric_band;
    use crate::field::Grid;

    #[test]
    fn rmise_examples() {
        let grid = Grid::uniform(4).unwrap();
        let truth = CoefficientField::from_fn(2, grid.clone(), |j, t| j as f64 * t);
        assert_eq!(rmise(&truth, &truth, 1).unwrap(), 0.0);
        let mut shifted = truth.clone();
        shifted.row_mut(0).iter_mut().for_each(|v| *v += -0.3);
        assert!((rmise(&shifted, &truth, 0).unwrap() - 0.3).abs() < 1e-15);
        let mut spike = truth.clone();
        spike[(1, 0)] += 1.0;
        assert!((rmise(&spike, &truth, 1).unwrap() - 0.5).abs() < 1e-15);
        let other = CoefficientField::zeros(2, Grid::uniform(5).unwrap());
        assert_eq!(rmise(&other, &truth, 0), Err(Error::GridMismatch));
    }

    #[test]
    fn coverage_examples() {
        let grid = Grid::uniform(3).unwrap();
        let truth = CoefficientField::from_fn(1, grid, |_, t| t);
        let wide = symmetric_band(&truth, f64::INFINITY, 0.1);
        assert!(coverage(&[wide], &truth).unwrap().proportions.iter().all(|p| *p == 1.0));

        let exact = symmetric_band(&truth, 0.0, 0.1);
        let mut off_center = truth.clone();
        off_center.values_mut().iter_mut().for_each(|v| *v += 1.0);
        let off = symmetric_band(&off_center, 0.0, 0.1);
        assert!(coverage(&[exact.clone()], &truth).unwrap().proportions.iter().all(|p| *p == 1.0));
        assert!(coverage(&[off.clone()], &truth).unwrap().proportions.iter().all(|p| *p == 0.0));
        let mixed = coverage(&[exact, off], &truth).unwrap();
        assert_eq!(mixed.at(0, 1), 0.5);
        assert!(coverage(&[], &truth).is_err());
    }

    #[test]
    fn summary_examples() {
        let s = summarize(&[vec![1.0, 5.0]]).unwrap();
        assert!(s.single_replication);
        assert_eq!(s.sd, vec![0.0, 0.0]);
        let s = summarize(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert!((s.sd[0] - libm::sqrt(2.0)).abs() < 1e-15);
        let s = summarize(&[vec![0.7], vec![0.7], vec![0.7]]).unwrap();
        assert_eq!(s.sd, vec![0.0]);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn ks_examples() {
        assert_eq!(ks_distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(ks_distance(&[0.0, 0.1], &[5.0, 6.0]).unwrap(), 1.0);
        assert!((ks_distance(&[1.0, 2.0, 3.0, 4.0], &[2.5]).unwrap() - 0.5).abs() < 1e-15);
    }
}
