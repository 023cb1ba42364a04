//! Natural cubic spline interpolation of coefficient curves.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{CoefficientField, Grid};

/// Piecewise cubic interpolant with zero second derivative at both ends.
///
/// Segment `i` covers `[knots[i], knots[i + 1]]` and stores
/// `[a, b, c, d]` for `a + b s + c s^2 + d s^3`, `s = t - knots[i]`.
/// Outside the knot range the curve is held at the boundary values.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineCurve {
    knots: Vec<f64>,
    segments: Vec<[f64; 4]>,
    last_value: f64,
}

impl SplineCurve {
    pub fn fit(knots: &[f64], values: &[f64]) -> Result<Self> {
        let n = knots.len();
        if n < 2 {
            return Err(Error::InvalidGrid("at least two knots required"));
        }
        if values.len() != n {
            return Err(Error::Shape {
                what: "spline values",
                expected: n,
                found: values.len(),
            });
        }
        if knots.iter().chain(values).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spline input"));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("knots must be strictly increasing"));
        }

        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let slope: Vec<f64> = (0..n - 1).map(|i| (values[i + 1] - values[i]) / h[i]).collect();

        // Second derivatives at the knots; the ends are pinned to zero and the
        // interior solves a diagonally dominant tridiagonal system.
        let mut second = vec![0.0; n];
        if n > 2 {
            let k = n - 2;
            let mut diag = vec![0.0; k];
            let mut rhs = vec![0.0; k];
            for i in 0..k {
                diag[i] = 2.0 * (h[i] + h[i + 1]);
                rhs[i] = 6.0 * (slope[i + 1] - slope[i]);
            }
            // Thomas algorithm: sub-diagonal h[i], super-diagonal h[i + 1].
            for i in 1..k {
                let factor = h[i] / diag[i - 1];
                diag[i] -= factor * h[i];
                rhs[i] -= factor * rhs[i - 1];
            }
            second[k] = rhs[k - 1] / diag[k - 1];
            for i in (0..k - 1).rev() {
                second[i + 1] = (rhs[i] - h[i + 1] * second[i + 2]) / diag[i];
            }
        }

        let segments = (0..n - 1)
            .map(|i| {
                let (m0, m1) = (second[i], second[i + 1]);
                [
                    values[i],
                    slope[i] - h[i] * (2.0 * m0 + m1) / 6.0,
                    0.5 * m0,
                    (m1 - m0) / (6.0 * h[i]),
                ]
            })
            .collect();

        Ok(Self {
            knots: knots.to_vec(),
            segments,
            last_value: values[n - 1],
        })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn segments(&self) -> &[[f64; 4]] {
        &self.segments
    }

    /// Index of the segment containing `t`, for `t` inside the knot range.
    fn segment_index(&self, t: f64) -> usize {
        let idx = self.knots.partition_point(|k| *k <= t);
        idx.saturating_sub(1).min(self.segments.len() - 1)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let first = self.knots[0];
        let last = self.knots[self.knots.len() - 1];
        if t <= first {
            return self.segments[0][0];
        }
        if t >= last {
            return self.last_value;
        }
        let i = self.segment_index(t);
        let [a, b, c, d] = self.segments[i];
        let s = t - self.knots[i];
        a + s * (b + s * (c + s * d))
    }
}

pub fn spline_fit(knots: &Grid, values: &[f64]) -> Result<SplineCurve> {
    SplineCurve::fit(knots.points(), values)
}

pub fn spline_eval(curve: &SplineCurve, t: f64) -> f64 {
    curve.eval(t)
}

/// Fits one spline per covariate row and evaluates it on `query`.
pub fn interpolate_field(field: &CoefficientField, query: &Grid) -> Result<CoefficientField> {
    let knots = field.grid().points();
    let mut out = CoefficientField::zeros(field.dim(), query.clone());
    for (j, row) in field.rows().enumerate() {
        let curve = SplineCurve::fit(knots, row)?;
        for (o, &t) in out.row_mut(j).iter_mut().zip(query.points()) {
            *o = curve.eval(t);
        }
    }
    Ok(out)
}
