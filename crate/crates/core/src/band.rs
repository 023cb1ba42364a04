//! Pointwise confidence bands from bootstrap replicates of the averaged
//! estimator's error.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::quantile::{normal_quantile, sorted_quantile};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BandMethod {
    /// Reflected bootstrap percentiles.
    Percentile,
    /// Normal interval with the bootstrap standard deviation.
    Variance,
}

impl BandMethod {
    pub fn name(self) -> &'static str {
        match self {
            BandMethod::Percentile => "percentile",
            BandMethod::Variance => "variance",
        }
    }
}

/// Lower and upper bounds per (covariate, grid point) at level `1 - tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub method: BandMethod,
    pub tau: f64,
    pub lower: CoefficientField,
    pub upper: CoefficientField,
}

impl ConfidenceBand {
    pub fn level(&self) -> f64 {
        1.0 - self.tau
    }

    pub fn contains(&self, j: usize, l: usize, value: f64) -> bool {
        self.lower[(j, l)] <= value && value <= self.upper[(j, l)]
    }

    pub fn width(&self, j: usize, l: usize) -> f64 {
        self.upper[(j, l)] - self.lower[(j, l)]
    }
}

fn check_inputs(
    estimate: &CoefficientField,
    replicates: &[&CoefficientField],
    n: u64,
    tau: f64,
) -> Result<()> {
    if replicates.len() < 2 {
        return Err(Error::InsufficientChains {
            required: 2,
            found: replicates.len(),
        });
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Probability(tau));
    }
    if n == 0 {
        return Err(Error::NoObservations);
    }
    if let Some(bad) = replicates.iter().find(|r| !r.same_shape(estimate)) {
        return Err(Error::Shape {
            what: "bootstrap replicate",
            expected: estimate.values().len(),
            found: bad.values().len(),
        });
    }
    Ok(())
}

/// Scaled replicate values `sqrt(n) * replicate[cell]` for one cell.
fn gather(replicates: &[&CoefficientField], cell: usize, root_n: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(replicates.iter().map(|r| root_n * r.values()[cell]));
}

/// Percentile band: `[est - q_{1-tau/2} / sqrt(n), est - q_{tau/2} / sqrt(n)]`
/// with `q_p` the nearest-rank quantile of `sqrt(n) * replicate`.
pub fn percentile_band(
    estimate: &CoefficientField,
    replicates: &[&CoefficientField],
    n: u64,
    tau: f64,
) -> Result<ConfidenceBand> {
    check_inputs(estimate, replicates, n, tau)?;
    let root_n = libm::sqrt(n as f64);
    let mut lower = estimate.clone();
    let mut upper = estimate.clone();
    let mut buf = Vec::with_capacity(replicates.len());
    for (cell, &center) in estimate.values().iter().enumerate() {
        gather(replicates, cell, root_n, &mut buf);
        buf.sort_unstable_by(f64::total_cmp);
        let q_lo = sorted_quantile(&buf, tau / 2.0);
        let q_hi = sorted_quantile(&buf, 1.0 - tau / 2.0);
        lower.values_mut()[cell] = center - q_hi / root_n;
        upper.values_mut()[cell] = center - q_lo / root_n;
    }
    Ok(ConfidenceBand {
        method: BandMethod::Percentile,
        tau,
        lower,
        upper,
    })
}

/// Variance band: `est -/+ z_{1-tau/2} * sqrt(s^2 / n)`, with `s^2` the
/// unbiased variance of `sqrt(n) * replicate`.
pub fn variance_band(
    estimate: &CoefficientField,
    replicates: &[&CoefficientField],
    n: u64,
    tau: f64,
) -> Result<ConfidenceBand> {
    check_inputs(estimate, replicates, n, tau)?;
    let z = normal_quantile(1.0 - tau / 2.0)?;
    let nf = n as f64;
    let root_n = libm::sqrt(nf);
    let mut lower = estimate.clone();
    let mut upper = estimate.clone();
    let mut buf = Vec::with_capacity(replicates.len());
    for (cell, &center) in estimate.values().iter().enumerate() {
        gather(replicates, cell, root_n, &mut buf);
        let half = z * libm::sqrt(unbiased_variance(&buf) / nf);
        lower.values_mut()[cell] = center - half;
        upper.values_mut()[cell] = center + half;
    }
    Ok(ConfidenceBand {
        method: BandMethod::Variance,
        tau,
        lower,
        upper,
    })
}

/// Two-pass unbiased variance; zero for fewer than two values.
pub fn unbiased_variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (n - 1.0)).max(0.0)
}

pub fn band(
    method: BandMethod,
    estimate: &CoefficientField,
    replicates: &[&CoefficientField],
    n: u64,
    tau: f64,
) -> Result<ConfidenceBand> {
    match method {
        BandMethod::Percentile => percentile_band(estimate, replicates, n, tau),
        BandMethod::Variance => variance_band(estimate, replicates, n, tau),
    }
}

/// Constant band `estimate -/+ half_width` (test and export helper).
pub fn symmetric_band(estimate: &CoefficientField, half_width: f64, tau: f64) -> ConfidenceBand {
    let mut lower = estimate.clone();
    let mut upper = estimate.clone();
    for v in lower.values_mut() {
        *v -= half_width;
    }
    for v in upper.values_mut() {
        *v += half_width;
    }
    ConfidenceBand {
        method: BandMethod::Variance,
        tau,
        lower,
        upper,
    }
}
