//! Synthetic data for the three-covariate simulation design.
//!
//! Covariates are trivariate normal with variances `0.5 * 2^(i-1)` and
//! correlations `0.5^|i-j|`. The residual curve is
//! `xi_1 * phi_1(t) + xi_2 * phi_2(t) + eps(t)` with
//! `phi_1(t) = -cos(pi (t - 0.5))`, `phi_2(t) = sin(t - 0.5)`, scores of
//! covariance `s * I_2` (normal or Student t with 3 degrees of freedom) and
//! white noise of variance `v` at each grid point.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::field::{CoefficientField, FunctionalSample, Grid};
use crate::linalg::Cholesky;
use crate::rng::{stream_rng, StreamRng};

pub const COVARIATES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Tail {
    #[default]
    Gaussian,
    StudentT3,
}

/// Reading of the third slope function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThirdSlope {
    /// `sin(pi t / 2) + sqrt(2) * (3 pi t / 2)`.
    #[default]
    Linear,
    /// `sin(pi t / 2) + sqrt(2) * sin(3 pi t / 2)`.
    Sine,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DgpConfig {
    pub n: usize,
    pub m: usize,
    pub tail: Tail,
    pub seed: u64,
    /// Variance of the pointwise white noise.
    pub noise_variance: f64,
    /// Covariance scale of the two basis scores.
    pub score_covariance_scale: f64,
    pub third_slope: ThirdSlope,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            n: 10_000,
            m: 50,
            tail: Tail::Gaussian,
            seed: 0,
            noise_variance: 0.5,
            score_covariance_scale: 0.5,
            third_slope: ThirdSlope::Linear,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("sample count must be at least 1"));
        }
        if self.m < 2 {
            return Err(Error::InvalidGrid("at least two points required"));
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.noise_variance) || !ok(self.score_covariance_scale) {
            return Err(Error::InvalidConfig("variances must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::uniform(self.m)
    }
}

/// The three slope functions evaluated at `t`.
pub fn beta_at(t: f64, third: ThirdSlope) -> [f64; 3] {
    let b1 = 2.0 * t * t;
    let b2 = libm::cos(1.5 * PI * t + FRAC_PI_2);
    let b3 = match third {
        ThirdSlope::Linear => libm::sin(FRAC_PI_2 * t) + SQRT_2 * (1.5 * PI * t),
        ThirdSlope::Sine => libm::sin(FRAC_PI_2 * t) + SQRT_2 * libm::sin(1.5 * PI * t),
    };
    [b1, b2, b3]
}

pub fn true_beta(grid: &Grid, third: ThirdSlope) -> CoefficientField {
    CoefficientField::from_fn(COVARIATES, grid.clone(), |j, t| beta_at(t, third)[j])
}

pub fn first_basis(t: f64) -> f64 {
    -libm::cos(PI * (t - 0.5))
}

pub fn second_basis(t: f64) -> f64 {
    libm::sin(t - 0.5)
}

/// Covariance of the covariate vector, row-major 3×3.
pub fn covariate_covariance() -> [f64; 9] {
    let var = [0.5, 1.0, 2.0];
    let mut cov = [0.0; 9];
    for i in 0..3 {
        for j in 0..3 {
            let rho = libm::pow(0.5, (i as f64 - j as f64).abs());
            cov[i * 3 + j] = rho * libm::sqrt(var[i] * var[j]);
        }
    }
    cov
}

/// Draws covariate vectors through a fixed Cholesky factor.
#[derive(Debug, Clone)]
pub struct CovariateSampler {
    factor: Cholesky,
}

impl Default for CovariateSampler {
    fn default() -> Self {
        Self::new()
    }
}

impl CovariateSampler {
    pub fn new() -> Self {
        let factor = Cholesky::factor(&covariate_covariance(), COVARIATES)
            .expect("covariate covariance is positive definite");
        Self { factor }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut z = [0.0; COVARIATES];
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let mut x = vec![0.0; COVARIATES];
        self.factor.mul_lower(&z, &mut x);
        x
    }
}

pub fn sample_covariates<R: Rng + ?Sized>(rng: &mut R) -> Vec<f64> {
    CovariateSampler::new().sample(rng)
}

/// Residual-curve sampler with basis values cached on the grid.
#[derive(Debug, Clone)]
pub struct ResidualSampler {
    tail: Tail,
    phi1: Vec<f64>,
    phi2: Vec<f64>,
    score_sd: f64,
    noise_sd: f64,
    chi2: ChiSquared<f64>,
}

impl ResidualSampler {
    pub fn new(grid: &Grid, tail: Tail, score_covariance_scale: f64, noise_variance: f64) -> Self {
        let score_sd = match tail {
            Tail::Gaussian => libm::sqrt(score_covariance_scale),
            // A t_3 vector with scale matrix S has covariance 3 S.
            Tail::StudentT3 => libm::sqrt(score_covariance_scale / 3.0),
        };
        Self {
            tail,
            phi1: grid.points().iter().map(|t| first_basis(*t)).collect(),
            phi2: grid.points().iter().map(|t| second_basis(*t)).collect(),
            score_sd,
            noise_sd: libm::sqrt(noise_variance),
            chi2: ChiSquared::new(3.0).expect("valid degrees of freedom"),
        }
    }

    /// The two basis scores `(xi_1, xi_2)`.
    pub fn sample_scores<R: Rng + ?Sized>(&self, rng: &mut R) -> [f64; 2] {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let mix = match self.tail {
            Tail::Gaussian => 1.0,
            Tail::StudentT3 => {
                let w: f64 = self.chi2.sample(rng);
                libm::sqrt(3.0 / w)
            }
        };
        [self.score_sd * z1 * mix, self.score_sd * z2 * mix]
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let [xi1, xi2] = self.sample_scores(rng);
        for (l, o) in out.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            *o = xi1 * self.phi1[l] + xi2 * self.phi2[l] + self.noise_sd * eps;
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.phi1.len()];
        self.sample_into(rng, &mut out);
        out
    }
}

/// Residual curve with the default variances (0.5 for scores and noise).
pub fn sample_residual<R: Rng + ?Sized>(rng: &mut R, grid: &Grid, tail: Tail) -> Vec<f64> {
    ResidualSampler::new(grid, tail, 0.5, 0.5).sample(rng)
}

/// Lazily generated dataset; a pure function of its [`DgpConfig`].
#[derive(Debug, Clone)]
pub struct DatasetStream {
    rng: StreamRng,
    beta: CoefficientField,
    covariates: CovariateSampler,
    residuals: ResidualSampler,
    remaining: usize,
}

impl DatasetStream {
    pub fn truth(&self) -> &CoefficientField {
        &self.beta
    }

    pub fn grid(&self) -> &Grid {
        self.beta.grid()
    }

    pub fn next_sample(&mut self) -> FunctionalSample {
        let x = self.covariates.sample(&mut self.rng);
        let mut y = vec![0.0; self.beta.grid_len()];
        self.residuals.sample_into(&mut self.rng, &mut y);
        for (xj, row) in x.iter().zip(self.beta.rows()) {
            for (o, b) in y.iter_mut().zip(row) {
                *o += xj * b;
            }
        }
        FunctionalSample { x, y }
    }
}

impl Iterator for DatasetStream {
    type Item = FunctionalSample;

    fn next(&mut self) -> Option<FunctionalSample> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.next_sample())
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl ExactSizeIterator for DatasetStream {}

pub fn generate_dataset(config: &DgpConfig) -> Result<DatasetStream> {
    config.validate()?;
    let grid = config.grid()?;
    Ok(DatasetStream {
        rng: stream_rng(config.seed),
        residuals: ResidualSampler::new(
            &grid,
            config.tail,
            config.score_covariance_scale,
            config.noise_variance,
        ),
        beta: true_beta(&grid, config.third_slope),
        covariates: CovariateSampler::new(),
        remaining: config.n,
    })
}
