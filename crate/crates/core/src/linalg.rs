//! Dense Cholesky factorization for the small d×d systems used here.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Lower-triangular factor `L` with `A = L L^T`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    /// Factors a symmetric positive definite row-major `n×n` matrix. Pivots
    /// below `1e-12` times the largest diagonal entry count as singular.
    pub fn factor(a: &[f64], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix must be n×n");
        let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
        if n == 0 || !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::SingularDesign);
        }
        let tol = 1e-12 * scale;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= l[i * n + k] * l[j * n + k];
                }
                if i == j {
                    if !(sum > tol) {
                        return Err(Error::SingularDesign);
                    }
                    l[i * n + i] = libm::sqrt(sum);
                } else {
                    l[i * n + j] = sum / l[j * n + j];
                }
            }
        }
        Ok(Self { n, lower: l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        let l = &self.lower;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= l[k * n + i] * b[k];
            }
            b[i] = s / l[i * n + i];
        }
    }

    /// `L z`, mapping white noise to the factored covariance.
    pub fn mul_lower(&self, z: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            out[i] = (0..=i).map(|k| self.lower[i * n + k] * z[k]).sum();
        }
    }
}
