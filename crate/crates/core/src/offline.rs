//! Batch comparators: geometric-median regression by iteratively reweighted
//! least squares, and ordinary least squares.
//!
//! The IRLS weights are per sample, `1 / |y_i - x_i^T beta|` with the norm
//! taken over the whole curve, and shared across grid points. This coupling
//! is what separates the geometric median from a pointwise median.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{grid_norm, CoefficientField, FunctionalSample, Grid};
use crate::linalg::Cholesky;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    pub max_iterations: usize,
    /// Stop once `|beta_new - beta| / |beta|` (Frobenius) falls below this.
    pub rel_tolerance: f64,
    /// Lower bound on residual norms when forming weights.
    pub weight_floor: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tolerance: 1e-8,
            weight_floor: 1e-10,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1"));
        }
        if !(self.rel_tolerance > 0.0) || !(self.weight_floor > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive"));
        }
        Ok(())
    }
}

/// Result of [`fit_gm_offline`].
#[derive(Debug, Clone)]
pub struct OfflineFit {
    /// Lowest-loss iterate encountered.
    pub field: CoefficientField,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Loss of every iterate, starting with the least-squares start.
    pub loss_history: Vec<f64>,
}

fn check_dataset(grid: &Grid, samples: &[FunctionalSample]) -> Result<usize> {
    let first = samples.first().ok_or(Error::Empty("dataset"))?;
    let d = first.x.len();
    for s in samples {
        s.validate(d, grid.len())?;
    }
    Ok(d)
}

/// Per-sample residual norms `|y_i - x_i^T field|`.
pub fn residual_norms(field: &CoefficientField, samples: &[FunctionalSample]) -> Result<Vec<f64>> {
    let mut buf = vec![0.0; field.grid_len()];
    samples
        .iter()
        .map(|s| {
            s.validate(field.dim(), field.grid_len())?;
            field.residual_into(&s.x, &s.y, 1.0, &mut buf);
            Ok(grid_norm(&buf))
        })
        .collect()
}

/// `sum_i |y_i - x_i^T field|` with the plain grid norm.
pub fn gm_loss(field: &CoefficientField, samples: &[FunctionalSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    Ok(residual_norms(field, samples)?.iter().sum())
}

/// Solves the weighted normal equations at every grid point with shared
/// per-sample weights (`None` means unit weights).
fn weighted_least_squares(
    grid: &Grid,
    d: usize,
    samples: &[FunctionalSample],
    weights: Option<&[f64]>,
) -> Result<CoefficientField> {
    let m = grid.len();
    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d * m];
    for (i, s) in samples.iter().enumerate() {
        let w = weights.map_or(1.0, |w| w[i]);
        for a in 0..d {
            let wa = w * s.x[a];
            for b in 0..d {
                gram[a * d + b] += wa * s.x[b];
            }
            let row = &mut rhs[a * m..(a + 1) * m];
            for (r, y) in row.iter_mut().zip(&s.y) {
                *r += wa * y;
            }
        }
    }
    let chol = Cholesky::factor(&gram, d)?;
    let mut column = vec![0.0; d];
    let mut field = CoefficientField::zeros(d, grid.clone());
    for l in 0..m {
        for a in 0..d {
            column[a] = rhs[a * m + l];
        }
        chol.solve_in_place(&mut column);
        for a in 0..d {
            field[(a, l)] = column[a];
        }
    }
    if field.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularDesign);
    }
    Ok(field)
}

/// Pointwise least squares: `(sum x x^T) beta(t_l) = sum x y(t_l)`.
pub fn fit_ls_offline(grid: &Grid, samples: &[FunctionalSample]) -> Result<CoefficientField> {
    let d = check_dataset(grid, samples)?;
    weighted_least_squares(grid, d, samples, None)
}

/// Geometric-median regression by IRLS, started from least squares.
///
/// Returns the best iterate; `converged` is false when the iteration cap was
/// hit before the relative change dropped under tolerance.
pub fn fit_gm_offline(
    grid: &Grid,
    samples: &[FunctionalSample],
    config: &OracleConfig,
) -> Result<OfflineFit> {
    config.validate()?;
    let d = check_dataset(grid, samples)?;
    let mut field = weighted_least_squares(grid, d, samples, None)?;
    let mut norms = residual_norms(&field, samples)?;
    let mut loss: f64 = norms.iter().sum();
    let mut history = vec![loss];
    let mut best = (field.clone(), loss);
    let mut converged = false;
    let mut iterations = 0;
    let mut weights = vec![0.0; samples.len()];

    while iterations < config.max_iterations {
        iterations += 1;
        for (w, r) in weights.iter_mut().zip(&norms) {
            *w = 1.0 / r.max(config.weight_floor);
        }
        let next = weighted_least_squares(grid, d, samples, Some(&weights))?;
        let change = next.distance(&field);
        let scale = field.frobenius_norm().max(f64::MIN_POSITIVE);
        field = next;
        norms = residual_norms(&field, samples)?;
        loss = norms.iter().sum();
        history.push(loss);
        if loss < best.1 {
            best = (field.clone(), loss);
        }
        if change / scale < config.rel_tolerance {
            converged = true;
            break;
        }
    }

    Ok(OfflineFit {
        field: best.0,
        loss: best.1,
        iterations,
        converged,
        loss_history: history,
    })
}
