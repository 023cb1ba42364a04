//! Robust function-on-scalar regression through the geometric median,
//! estimated online.
//!
//! A functional response `Y(t)`, observed on a common grid, is regressed on
//! scalar covariates `x` through slope curves `beta_j(t)`. The estimator is an
//! averaged stochastic gradient recursion on the geometric-median loss
//! `|Y - x^T beta|`, so every observation is seen once and then discarded.
//! Pointwise confidence bands come from an online wild bootstrap run in
//! lockstep with the estimator.
//!
//! Modules:
//!
//! - [`field`]: grids, observations and coefficient fields
//! - [`online`]: step schedule and the averaged recursion
//! - [`bootstrap`] and [`band`]: bootstrap chains and confidence bands
//! - [`offline`]: batch IRLS and least-squares comparators
//! - [`spline`]: natural cubic spline interpolation off the grid
//! - [`dgp`]: the synthetic simulation design
//! - [`metrics`]: RMISE, coverage and replication summaries
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod band;
pub mod bootstrap;
pub mod dgp;
pub mod error;
pub mod field;
pub mod linalg;
pub mod metrics;
pub mod offline;
pub mod online;
pub mod quantile;
pub mod rng;
pub mod spline;
pub mod stats;

pub use band::{BandMethod, ConfidenceBand};
pub use bootstrap::{BootstrapChain, ChainStep, InferenceEngine};
pub use dgp::{generate_dataset, true_beta, DgpConfig, Tail, ThirdSlope};
pub use error::{Error, Result};
pub use field::{apply_coefficients, grid_norm, CoefficientField, FunctionalSample, Grid};
pub use metrics::{coverage, rmise, summarize, CoverageMap, ReplicationSummary};
pub use offline::{fit_gm_offline, fit_ls_offline, gm_loss, OfflineFit, OracleConfig};
pub use online::{fit_stream, FitConfig, GmState, ResidualNorm, StepOutcome, StepSchedule};
pub use quantile::{normal_quantile, sample_quantile};
pub use spline::{interpolate_field, SplineCurve};
