use thiserror::Error;

/// Errors produced by the estimation, inference and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),

    #[error("shape mismatch: expected {expected}, got {found} ({what})")]
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("grids differ")]
    GridMismatch,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("observation counter must be at least 1")]
    InvalidCounter,

    #[error("invalid step schedule: gamma = {gamma}, alpha = {alpha}")]
    InvalidSchedule { gamma: f64, alpha: f64 },

    #[error("probability {0} outside the open unit interval")]
    Probability(f64),

    #[error("at least {required} bootstrap chains required, have {found}")]
    InsufficientChains { required: usize, found: usize },

    #[error("no observations absorbed yet")]
    NoObservations,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("design matrix is singular or not positive definite")]
    SingularDesign,

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
