//! Averaged stochastic gradient recursion for geometric-median regression.
//!
//! Each observation moves the iterate along the unit-norm residual direction
//! scaled by the covariates, and the running average of the iterates is the
//! estimator that gets reported.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{grid_norm, CoefficientField, FunctionalSample, Grid};

/// Residual norms below this skip the update, since the direction is undefined.
pub const DEFAULT_RESIDUAL_FLOOR: f64 = 1e-10;

/// Step sizes `gamma * n^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StepSchedule {
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            gamma: 3.0,
            alpha: 0.75,
        }
    }
}

impl StepSchedule {
    pub fn new(gamma: f64, alpha: f64) -> Result<Self> {
        let s = Self { gamma, alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma.is_finite() && self.gamma > 0.0 && self.alpha > 0.5 && self.alpha <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSchedule {
                gamma: self.gamma,
                alpha: self.alpha,
            })
        }
    }

    /// Step used for the `n`-th incoming observation (1-based).
    pub fn step_size(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidCounter);
        }
        Ok(self.gamma * libm::pow(n as f64, -self.alpha))
    }
}

pub fn step_size(n: u64, schedule: &StepSchedule) -> Result<f64> {
    schedule.step_size(n)
}

/// Norm used to normalise the residual in the gradient step.
///
/// `Quadrature` is the Riemann approximation `sqrt(mean_l r_l^2)` of the
/// `L2[0, 1]` norm and makes the step size independent of the grid density;
/// `Euclidean` is the plain [`grid_norm`]. They differ by the factor
/// `sqrt(m)`, which is equivalent to rescaling `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ResidualNorm {
    #[default]
    Quadrature,
    Euclidean,
}

impl ResidualNorm {
    pub fn eval(self, residual: &[f64]) -> f64 {
        let norm = grid_norm(residual);
        match self {
            ResidualNorm::Euclidean => norm,
            ResidualNorm::Quadrature => norm / libm::sqrt(residual.len() as f64),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ResidualNorm::Quadrature => "quadrature",
            ResidualNorm::Euclidean => "euclidean",
        }
    }
}

/// Whether an update moved the iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    /// Residual norm fell under the floor; the iterate was left as is.
    Skipped,
}

/// `iterate += gamma * x (outer) residual / |residual|`, unless the residual
/// norm is below `floor`.
pub(crate) fn normalized_update(
    iterate: &mut CoefficientField,
    x: &[f64],
    residual: &[f64],
    gamma: f64,
    floor: f64,
    kind: ResidualNorm,
) -> StepOutcome {
    let norm = kind.eval(residual);
    if norm < floor {
        return StepOutcome::Skipped;
    }
    let scale = gamma / norm;
    let m = residual.len();
    for (xj, row) in x.iter().zip(iterate.values_mut().chunks_exact_mut(m)) {
        let c = scale * xj;
        for (b, r) in row.iter_mut().zip(residual) {
            *b += c * r;
        }
    }
    StepOutcome::Accepted
}

/// Running mean: `average += (iterate - average) / (count_before + 1)`.
pub fn update_average(average: &mut CoefficientField, iterate: &CoefficientField, count_before: u64) {
    let w = 1.0 / (count_before as f64 + 1.0);
    for (a, b) in average.values_mut().iter_mut().zip(iterate.values()) {
        *a += (b - *a) * w;
    }
}

/// Recursive estimator state: current iterate, its running average and the
/// number of observations absorbed so far.
#[derive(Debug, Clone)]
pub struct GmState {
    current: CoefficientField,
    average: CoefficientField,
    n: u64,
    schedule: StepSchedule,
    floor: f64,
    norm: ResidualNorm,
    scratch: Vec<f64>,
}

impl GmState {
    pub fn new(initial: CoefficientField, schedule: StepSchedule) -> Result<Self> {
        schedule.validate()?;
        let m = initial.grid_len();
        Ok(Self {
            average: initial.clone(),
            current: initial,
            n: 0,
            schedule,
            floor: DEFAULT_RESIDUAL_FLOOR,
            norm: ResidualNorm::default(),
            scratch: vec![0.0; m],
        })
    }

    pub fn zeros(dim: usize, grid: Grid, schedule: StepSchedule) -> Result<Self> {
        Self::new(CoefficientField::zeros(dim, grid), schedule)
    }

    /// Restores a state from its stored components.
    pub fn from_parts(
        current: CoefficientField,
        average: CoefficientField,
        n: u64,
        schedule: StepSchedule,
        floor: f64,
        norm: ResidualNorm,
    ) -> Result<Self> {
        schedule.validate()?;
        if !current.same_shape(&average) {
            return Err(Error::Shape {
                what: "average",
                expected: current.values().len(),
                found: average.values().len(),
            });
        }
        if !(floor > 0.0) {
            return Err(Error::InvalidConfig("residual floor must be positive"));
        }
        let m = current.grid_len();
        Ok(Self {
            current,
            average,
            n,
            schedule,
            floor,
            norm,
            scratch: vec![0.0; m],
        })
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn with_norm(mut self, norm: ResidualNorm) -> Self {
        self.norm = norm;
        self
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn current(&self) -> &CoefficientField {
        &self.current
    }

    /// The averaged estimate reported to callers.
    pub fn average(&self) -> &CoefficientField {
        &self.average
    }

    pub fn schedule(&self) -> StepSchedule {
        self.schedule
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn norm(&self) -> ResidualNorm {
        self.norm
    }

    pub fn dim(&self) -> usize {
        self.current.dim()
    }

    pub fn grid(&self) -> &Grid {
        self.current.grid()
    }

    /// Number of `f64` values held by the state.
    pub fn stored_scalars(&self) -> usize {
        self.current.values().len() + self.average.values().len() + self.scratch.len()
    }

    pub fn validate_sample(&self, sample: &FunctionalSample) -> Result<()> {
        sample.validate(self.dim(), self.current.grid_len())
    }

    /// The iterate the next observation would produce, without mutating.
    pub fn sgd_step(&self, sample: &FunctionalSample) -> Result<CoefficientField> {
        self.validate_sample(sample)?;
        let gamma = self.schedule.step_size(self.n + 1)?;
        let mut next = self.current.clone();
        let mut residual = vec![0.0; next.grid_len()];
        next.residual_into(&sample.x, &sample.y, 1.0, &mut residual);
        normalized_update(&mut next, &sample.x, &residual, gamma, self.floor, self.norm);
        Ok(next)
    }

    /// Absorbs one observation: gradient step, then averaging.
    pub fn observe(&mut self, sample: &FunctionalSample) -> Result<StepOutcome> {
        self.validate_sample(sample)?;
        Ok(self.observe_unchecked(sample))
    }

    pub(crate) fn observe_unchecked(&mut self, sample: &FunctionalSample) -> StepOutcome {
        let next = self.n + 1;
        let gamma = self.schedule.gamma * libm::pow(next as f64, -self.schedule.alpha);
        self.current
            .residual_into(&sample.x, &sample.y, 1.0, &mut self.scratch);
        let outcome = normalized_update(
            &mut self.current,
            &sample.x,
            &self.scratch,
            gamma,
            self.floor,
            self.norm,
        );
        update_average(&mut self.average, &self.current, self.n);
        self.n = next;
        outcome
    }
}

/// Options for folding a stream into a fresh [`GmState`].
#[derive(Debug, Clone, Default)]
pub struct FitConfig {
    pub schedule: StepSchedule,
    /// Starting iterate; zeros when absent.
    pub initial: Option<CoefficientField>,
    /// Residual-norm floor; [`DEFAULT_RESIDUAL_FLOOR`] when absent.
    pub floor: Option<f64>,
    pub norm: ResidualNorm,
}

impl FitConfig {
    pub fn with_schedule(schedule: StepSchedule) -> Self {
        Self {
            schedule,
            ..Self::default()
        }
    }

    pub fn initial_state(&self, dim: usize, grid: &Grid) -> Result<GmState> {
        let initial = match &self.initial {
            Some(f) => {
                if f.dim() != dim || !f.grid().same_as(grid) {
                    return Err(Error::Shape {
                        what: "initial field",
                        expected: dim * grid.len(),
                        found: f.values().len(),
                    });
                }
                f.clone()
            }
            None => CoefficientField::zeros(dim, grid.clone()),
        };
        let state = GmState::new(initial, self.schedule)?;
        Ok(state
            .with_floor(self.floor.unwrap_or(DEFAULT_RESIDUAL_FLOOR))
            .with_norm(self.norm))
    }
}

/// Folds [`GmState::observe`] over a non-empty stream. The covariate count is
/// taken from the first sample; any later shape change is an error.
pub fn fit_stream<I>(grid: &Grid, samples: I, config: &FitConfig) -> Result<GmState>
where
    I: IntoIterator,
    I::Item: core::borrow::Borrow<FunctionalSample>,
{
    use core::borrow::Borrow;

    let mut iter = samples.into_iter();
    let first = iter.next().ok_or(Error::Empty("sample stream"))?;
    let first = first.borrow();
    let mut state = config.initial_state(first.x.len(), grid)?;
    state.observe(first)?;
    for sample in iter {
        state.observe(sample.borrow())?;
    }
    Ok(state)
}
