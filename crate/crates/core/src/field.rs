//! Functional observations on a shared sampling grid, and the d×m coefficient
//! fields that the estimators operate on.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Common sampling locations `t_1 < ... < t_m` in `[0, 1]`.
///
/// Cloning is cheap: the points are shared between every field built on the
/// same grid.
#[derive(Debug, Clone)]
pub struct Grid {
    points: Arc<[f64]>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid("at least two points required"));
        }
        if points.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > 1.0) {
            return Err(Error::InvalidGrid("points must lie in [0, 1]"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("points must be strictly increasing"));
        }
        Ok(Self {
            points: points.into(),
        })
    }

    /// `m` equally spaced points including both endpoints.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::InvalidGrid("at least two points required"));
        }
        let last = (m - 1) as f64;
        let points: Vec<f64> = (0..m).map(|l| l as f64 / last).collect();
        Self::new(points)
    }

    /// Maps arbitrary strictly increasing locations affinely onto `[0, 1]`.
    pub fn rescaled(locations: &[f64]) -> Result<Self> {
        if locations.len() < 2 {
            return Err(Error::InvalidGrid("at least two points required"));
        }
        if locations.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite location"));
        }
        let lo = locations[0];
        let hi = locations[locations.len() - 1];
        if hi <= lo {
            return Err(Error::InvalidGrid("points must be strictly increasing"));
        }
        let span = hi - lo;
        let mut points: Vec<f64> = locations.iter().map(|t| (t - lo) / span).collect();
        let last = points.len() - 1;
        points[0] = 0.0;
        points[last] = 1.0;
        Self::new(points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// True when both grids share storage or hold identical points.
    pub fn same_as(&self, other: &Grid) -> bool {
        Arc::ptr_eq(&self.points, &other.points) || self.points[..] == other.points[..]
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.same_as(other)
    }
}

/// Euclidean norm of values on the grid: `sqrt(sum v_l^2)`, no quadrature weights.
pub fn grid_norm(values: &[f64]) -> f64 {
    libm::sqrt(values.iter().map(|v| v * v).sum::<f64>())
}

/// One observation: scalar covariates and the response curve on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl FunctionalSample {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    /// Checks lengths against `(d, m)` and rejects non-finite entries.
    pub fn validate(&self, d: usize, m: usize) -> Result<()> {
        if self.x.len() != d {
            return Err(Error::Shape {
                what: "covariates",
                expected: d,
                found: self.x.len(),
            });
        }
        if self.y.len() != m {
            return Err(Error::Shape {
                what: "response",
                expected: m,
                found: self.y.len(),
            });
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates"));
        }
        if self.y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("response"));
        }
        Ok(())
    }
}

/// A d×m array holding `beta_j(t_l)`, stored row-major by covariate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    dim: usize,
    grid: Grid,
    values: Vec<f64>,
}

impl CoefficientField {
    pub fn zeros(dim: usize, grid: Grid) -> Self {
        let values = vec![0.0; dim * grid.len()];
        Self { dim, grid, values }
    }

    pub fn from_values(dim: usize, grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != dim * grid.len() {
            return Err(Error::Shape {
                what: "coefficient values",
                expected: dim * grid.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient values"));
        }
        Ok(Self { dim, grid, values })
    }

    /// Builds a field from one closure per covariate evaluated on the grid.
    pub fn from_fn(dim: usize, grid: Grid, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(dim * grid.len());
        for j in 0..dim {
            values.extend(grid.points().iter().map(|&t| f(j, t)));
        }
        Self { dim, grid, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let m = self.grid.len();
        &self.values[j * m..(j + 1) * m]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let m = self.grid.len();
        &mut self.values[j * m..(j + 1) * m]
    }

    pub fn rows(&self) -> core::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.grid.len())
    }

    pub fn same_shape(&self, other: &CoefficientField) -> bool {
        self.dim == other.dim && self.grid.same_as(&other.grid)
    }

    pub fn frobenius_norm(&self) -> f64 {
        grid_norm(&self.values)
    }

    /// Frobenius distance; panics if the shapes differ.
    pub fn distance(&self, other: &CoefficientField) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        libm::sqrt(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
        )
    }

    /// Frobenius inner product over all (j, l) cells.
    pub fn inner(&self, other: &CoefficientField) -> f64 {
        assert_eq!(self.values.len(), other.values.len());
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum()
    }

    /// `x^T beta` evaluated on the grid.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.grid.len()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Shape {
                what: "covariates",
                expected: self.dim,
                found: x.len(),
            });
        }
        if out.len() != self.grid.len() {
            return Err(Error::Shape {
                what: "output",
                expected: self.grid.len(),
                found: out.len(),
            });
        }
        out.fill(0.0);
        for (xj, row) in x.iter().zip(self.rows()) {
            for (o, b) in out.iter_mut().zip(row) {
                *o += xj * b;
            }
        }
        Ok(())
    }

    /// Writes `y - x^T beta` into `out`; shapes must already be validated.
    pub(crate) fn residual_into(&self, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(y) {
            *o = scale * v;
        }
        for (xj, row) in x.iter().zip(self.rows()) {
            for (o, b) in out.iter_mut().zip(row) {
                *o -= xj * b;
            }
        }
    }

    /// `self = a * self + b * other`, elementwise.
    pub fn axpby(&mut self, a: f64, b: f64, other: &CoefficientField) {
        assert_eq!(self.values.len(), other.values.len());
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s = a * *s + b * o;
        }
    }
}

impl Index<(usize, usize)> for CoefficientField {
    type Output = f64;

    fn index(&self, (j, l): (usize, usize)) -> &f64 {
        &self.values[j * self.grid.len() + l]
    }
}

impl IndexMut<(usize, usize)> for CoefficientField {
    fn index_mut(&mut self, (j, l): (usize, usize)) -> &mut f64 {
        let m = self.grid.len();
        &mut self.values[j * m + l]
    }
}

/// `x^T field` on the grid.
pub fn apply_coefficients(field: &CoefficientField, x: &[f64]) -> Result<Vec<f64>> {
    field.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_grid_small_cases() {
        assert_eq!(Grid::uniform(2).unwrap().points(), &[0.0, 1.0]);
        assert_eq!(Grid::uniform(3).unwrap().points(), &[0.0, 0.5, 1.0]);
        let g = Grid::uniform(50).unwrap();
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.points()[49], 1.0);
        for (l, t) in g.points().iter().enumerate() {
            assert!((t - l as f64 / 49.0).abs() < 1e-12);
        }
        for w in g.points().windows(2) {
            assert!((w[1] - w[0] - 1.0 / 49.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(matches!(Grid::uniform(1), Err(Error::InvalidGrid(_))));
        assert!(matches!(Grid::uniform(0), Err(Error::InvalidGrid(_))));
        assert!(Grid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(Grid::new(vec![0.0, 1.5]).is_err());
        assert!(Grid::new(vec![0.5, 0.2]).is_err());
    }

    #[test]
    fn rescaled_grid_hits_endpoints() {
        let hours: Vec<f64> = (0..24).map(|h| h as f64).collect();
        let g = Grid::rescaled(&hours).unwrap();
        assert_eq!(g.len(), 24);
        for (k, t) in g.points().iter().enumerate() {
            assert!((t - k as f64 / 23.0).abs() < 1e-15);
        }
    }

    #[test]
    fn norm_examples() {
        assert_eq!(grid_norm(&[0.0; 5]), 0.0);
        assert_eq!(grid_norm(&[3.0, 4.0]), 5.0);
        assert!((grid_norm(&[1.0; 7]) - libm::sqrt(7.0)).abs() < 1e-15);
        assert_eq!(grid_norm(&[]), 0.0);
    }

    #[test]
    fn apply_examples() {
        let grid = Grid::uniform(3).unwrap();
        let f = CoefficientField::from_values(1, grid.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(apply_coefficients(&f, &[2.0]).unwrap(), vec![2.0, 4.0, 6.0]);
        assert_eq!(apply_coefficients(&f, &[0.0]).unwrap(), vec![0.0; 3]);

        let g = CoefficientField::from_fn(3, grid, |j, t| j as f64 + t);
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            assert_eq!(g.apply(&e).unwrap(), g.row(j));
        }
        assert!(matches!(
            g.apply(&[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn sample_validation() {
        let s = FunctionalSample::new(vec![1.0], vec![0.0, f64::NAN]);
        assert_eq!(s.validate(1, 2), Err(Error::NonFinite("response")));
        let s = FunctionalSample::new(vec![1.0, 2.0], vec![0.0, 1.0]);
        assert!(matches!(s.validate(1, 2), Err(Error::Shape { .. })));
    }
}
