//! Online wild bootstrap running alongside the averaged estimator.
//!
//! Every chain replays the estimator's recursion on residuals
//! `W * (y - x^T beta_bar_n)` with its own Rademacher multipliers `W`, where
//! `beta_bar_n` is the average from *before* the current observation was
//! absorbed. The chain averages approximate the sampling distribution of
//! `beta_bar_n - beta`. Only the B chain iterates and averages are stored.

use alloc::vec;
use alloc::vec::Vec;

use crate::band::{self, BandMethod, ConfidenceBand};
use crate::error::{Error, Result};
use crate::field::{CoefficientField, FunctionalSample, Grid};
use crate::online::{normalized_update, update_average, GmState, ResidualNorm, StepOutcome};
use crate::rng::{derive_seed, rademacher_draw, stream_rng, RngState, StreamRng};

pub const DEFAULT_CHAINS: usize = 500;

/// Per-observation inputs shared by every chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainStep<'a> {
    pub x: &'a [f64],
    /// `y - x^T beta_bar_n` with the pre-update average.
    pub residual: &'a [f64],
    pub gamma: f64,
    /// Observations absorbed before this one.
    pub count_before: u64,
    pub floor: f64,
    pub norm: ResidualNorm,
}

/// One bootstrap recursion: iterate, running average and a private generator.
#[derive(Debug, Clone)]
pub struct BootstrapChain {
    iterate: CoefficientField,
    average: CoefficientField,
    rng: StreamRng,
    scratch: Vec<f64>,
}

impl BootstrapChain {
    /// Zero-initialised chain `index` whose generator is seeded from
    /// `(master_seed, index)` only.
    pub fn new(dim: usize, grid: Grid, master_seed: u64, index: u64) -> Self {
        let m = grid.len();
        let zeros = CoefficientField::zeros(dim, grid);
        Self {
            iterate: zeros.clone(),
            average: zeros,
            rng: stream_rng(derive_seed(master_seed, index)),
            scratch: vec![0.0; m],
        }
    }

    pub fn from_parts(iterate: CoefficientField, average: CoefficientField, rng: RngState) -> Result<Self> {
        if !iterate.same_shape(&average) {
            return Err(Error::Shape {
                what: "chain average",
                expected: iterate.values().len(),
                found: average.values().len(),
            });
        }
        let m = iterate.grid_len();
        Ok(Self {
            iterate,
            average,
            rng: rng.restore(),
            scratch: vec![0.0; m],
        })
    }

    pub fn iterate(&self) -> &CoefficientField {
        &self.iterate
    }

    pub fn average(&self) -> &CoefficientField {
        &self.average
    }

    pub fn rng_state(&self) -> RngState {
        RngState::capture(&self.rng)
    }

    pub fn stored_scalars(&self) -> usize {
        self.iterate.values().len() + self.average.values().len() + self.scratch.len()
    }

    /// Draws this chain's multiplier and advances it by one observation.
    pub fn step(&mut self, ctx: &ChainStep<'_>) -> StepOutcome {
        let w = rademacher_draw(&mut self.rng);
        self.step_with_weight(ctx, w)
    }

    /// Advances with a given multiplier; the generator is not touched.
    pub fn step_with_weight(&mut self, ctx: &ChainStep<'_>, weight: f64) -> StepOutcome {
        self.iterate
            .residual_into(ctx.x, ctx.residual, weight, &mut self.scratch);
        let outcome = normalized_update(
            &mut self.iterate,
            ctx.x,
            &self.scratch,
            ctx.gamma,
            ctx.floor,
            ctx.norm,
        );
        update_average(&mut self.average, &self.iterate, ctx.count_before);
        outcome
    }
}

/// Single bootstrap update against an explicit pre-update average.
pub fn bootstrap_step(
    chain: &mut BootstrapChain,
    sample: &FunctionalSample,
    beta_bar: &CoefficientField,
    gamma: f64,
    count_before: u64,
    norm: ResidualNorm,
) -> Result<StepOutcome> {
    sample.validate(beta_bar.dim(), beta_bar.grid_len())?;
    if !chain.iterate.same_shape(beta_bar) {
        return Err(Error::GridMismatch);
    }
    let mut residual = vec![0.0; beta_bar.grid_len()];
    beta_bar.residual_into(&sample.x, &sample.y, 1.0, &mut residual);
    let ctx = ChainStep {
        x: &sample.x,
        residual: &residual,
        gamma,
        count_before,
        floor: crate::online::DEFAULT_RESIDUAL_FLOOR,
        norm,
    };
    Ok(chain.step(&ctx))
}

/// Estimator plus `B` bootstrap chains advanced in lockstep.
#[derive(Debug, Clone)]
pub struct InferenceEngine {
    gm: GmState,
    chains: Vec<BootstrapChain>,
    master_seed: u64,
    residual: Vec<f64>,
}

impl InferenceEngine {
    /// Requires a state that has not absorbed any observation yet.
    pub fn new(gm: GmState, chains: usize, master_seed: u64) -> Result<Self> {
        if gm.count() != 0 {
            return Err(Error::InvalidConfig(
                "bootstrap chains must start with the estimator",
            ));
        }
        let dim = gm.dim();
        let grid = gm.grid().clone();
        let chains = (0..chains as u64)
            .map(|b| BootstrapChain::new(dim, grid.clone(), master_seed, b))
            .collect();
        let m = grid.len();
        Ok(Self {
            gm,
            chains,
            master_seed,
            residual: vec![0.0; m],
        })
    }

    pub fn from_parts(gm: GmState, chains: Vec<BootstrapChain>, master_seed: u64) -> Result<Self> {
        if let Some(bad) = chains.iter().find(|c| !c.iterate.same_shape(gm.current())) {
            return Err(Error::Shape {
                what: "bootstrap chain",
                expected: gm.current().values().len(),
                found: bad.iterate.values().len(),
            });
        }
        let m = gm.grid().len();
        Ok(Self {
            gm,
            chains,
            master_seed,
            residual: vec![0.0; m],
        })
    }

    pub fn estimator(&self) -> &GmState {
        &self.gm
    }

    pub fn estimate(&self) -> &CoefficientField {
        self.gm.average()
    }

    pub fn count(&self) -> u64 {
        self.gm.count()
    }

    pub fn chains(&self) -> &[BootstrapChain] {
        &self.chains
    }

    pub fn chain_count(&self) -> usize {
        self.chains.len()
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn chain_averages(&self) -> Vec<&CoefficientField> {
        self.chains.iter().map(|c| c.average()).collect()
    }

    /// Number of `f64` values held across the estimator and all chains.
    pub fn stored_scalars(&self) -> usize {
        self.gm.stored_scalars()
            + self.residual.len()
            + self.chains.iter().map(BootstrapChain::stored_scalars).sum::<usize>()
    }

    /// Absorbs one observation, updating the chains serially.
    pub fn observe(&mut self, sample: &FunctionalSample) -> Result<StepOutcome> {
        self.observe_with(sample, |chains, ctx| {
            for chain in chains {
                chain.step(ctx);
            }
        })
    }

    /// Absorbs one observation, handing the chain updates to `run_chains`.
    ///
    /// Chains are independent within a step, so `run_chains` may process
    /// them in any order or concurrently; each must be stepped exactly once.
    pub fn observe_with<F>(&mut self, sample: &FunctionalSample, run_chains: F) -> Result<StepOutcome>
    where
        F: FnOnce(&mut [BootstrapChain], &ChainStep<'_>),
    {
        self.gm.validate_sample(sample)?;
        let count_before = self.gm.count();
        let gamma = self.gm.schedule().step_size(count_before + 1)?;
        self.gm
            .average()
            .residual_into(&sample.x, &sample.y, 1.0, &mut self.residual);
        let outcome = self.gm.observe_unchecked(sample);
        let ctx = ChainStep {
            x: &sample.x,
            residual: &self.residual,
            gamma,
            count_before,
            floor: self.gm.floor(),
            norm: self.gm.norm(),
        };
        run_chains(&mut self.chains, &ctx);
        Ok(outcome)
    }

    pub fn percentile_band(&self, tau: f64) -> Result<ConfidenceBand> {
        self.band(BandMethod::Percentile, tau)
    }

    pub fn variance_band(&self, tau: f64) -> Result<ConfidenceBand> {
        self.band(BandMethod::Variance, tau)
    }

    pub fn band(&self, method: BandMethod, tau: f64) -> Result<ConfidenceBand> {
        if self.chains.len() < 2 {
            return Err(Error::InsufficientChains {
                required: 2,
                found: self.chains.len(),
            });
        }
        band::band(method, self.estimate(), &self.chain_averages(), self.count(), tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::online::StepSchedule;

    fn grid2() -> Grid {
        Grid::uniform(2).unwrap()
    }

    #[test]
    fn exact_residual_leaves_chain_at_zero() {
        let grid = grid2();
        let beta_bar = CoefficientField::from_values(1, grid.clone(), vec![0.5, -0.5]).unwrap();
        let mut chain = BootstrapChain::new(1, grid, 1, 0);
        let sample = FunctionalSample::new(vec![2.0], vec![1.0, -1.0]);
        let outcome = bootstrap_step(&mut chain, &sample, &beta_bar, 0.3, 0, ResidualNorm::Euclidean).unwrap();
        assert_eq!(outcome, StepOutcome::Skipped);
        assert!(chain.iterate().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn chain_step_arithmetic() {
        let mut chain = BootstrapChain::new(1, grid2(), 0, 0);
        let ctx = ChainStep {
            x: &[1.0],
            residual: &[1.0, 1.0],
            gamma: 0.1,
            count_before: 0,
            floor: 1e-10,
            norm: ResidualNorm::Euclidean,
        };
        chain.step_with_weight(&ctx, 1.0);
        let expect = 0.1 / libm::sqrt(2.0);
        for v in chain.iterate().values() {
            assert!((v - expect).abs() < 1e-15);
            assert!((v - 0.070711).abs() < 1e-6);
        }
        assert_eq!(chain.average(), chain.iterate());
    }

    #[test]
    fn weight_flip_negates_update_from_origin() {
        let ctx = ChainStep {
            x: &[0.4, -1.1],
            residual: &[0.3, -2.0, 1.7],
            gamma: 0.7,
            count_before: 3,
            floor: 1e-10,
            norm: ResidualNorm::Euclidean,
        };
        let grid = Grid::uniform(3).unwrap();
        let mut plus = BootstrapChain::new(2, grid.clone(), 0, 0);
        let mut minus = BootstrapChain::new(2, grid, 0, 0);
        plus.step_with_weight(&ctx, 1.0);
        minus.step_with_weight(&ctx, -1.0);
        for (a, b) in plus.iterate().values().iter().zip(minus.iterate().values()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn no_chains_matches_plain_estimator() {
        let grid = Grid::uniform(4).unwrap();
        let schedule = StepSchedule::default();
        let mut engine = InferenceEngine::new(GmState::zeros(2, grid.clone(), schedule).unwrap(), 0, 9).unwrap();
        let mut plain = GmState::zeros(2, grid, schedule).unwrap();
        for i in 0..20 {
            let f = i as f64;
            let s = FunctionalSample::new(vec![1.0, f.sin()], vec![f.cos(), 1.0, -f, 0.5]);
            engine.observe(&s).unwrap();
            plain.observe(&s).unwrap();
        }
        assert_eq!(engine.estimate(), plain.average());
        assert_eq!(engine.estimator().current(), plain.current());
        assert!(matches!(engine.percentile_band(0.1), Err(Error::InsufficientChains { .. })));
    }

    #[test]
    fn chain_uses_pre_update_average() {
        let grid = grid2();
        let schedule = StepSchedule::new(1.0, 0.75).unwrap();
        let mut engine = InferenceEngine::new(GmState::zeros(1, grid.clone(), schedule).unwrap(), 1, 3).unwrap();
        let first = FunctionalSample::new(vec![1.0], vec![2.0, 2.0]);
        engine.observe(&first).unwrap();
        let before = engine.estimate().clone();
        let second = FunctionalSample::new(vec![1.0], vec![-1.0, 3.0]);

        let mut manual = engine.chains()[0].clone();
        let gamma = schedule.step_size(2).unwrap();
        bootstrap_step(&mut manual, &second, &before, gamma, 1, ResidualNorm::default()).unwrap();

        engine.observe(&second).unwrap();
        assert_eq!(engine.chains()[0].average(), manual.average());
    }

    #[test]
    fn restarted_engine_rejected() {
        let grid = grid2();
        let mut gm = GmState::zeros(1, grid, StepSchedule::default()).unwrap();
        gm.observe(&FunctionalSample::new(vec![1.0], vec![1.0, 0.0])).unwrap();
        assert!(InferenceEngine::new(gm, 4, 0).is_err());
    }
}
