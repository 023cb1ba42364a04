//! Run configuration: one JSON document, with a handful of flags layered on top.

use std::fs;
use std::path::{Path, PathBuf};

use fosr_gm::{DgpConfig, ResidualNorm, StepSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, IoContext, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Simulate,
    Fit,
    Infer,
    Benchmark,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Fit => "fit",
            Mode::Infer => "infer",
            Mode::Benchmark => "benchmark",
        }
    }
}

/// What to do with a row that cannot be parsed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MalformedPolicy {
    #[default]
    Skip,
    Abort,
}

/// Which columns of the input CSV feed the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMapping {
    /// Covariate columns in order; every column without the response prefix
    /// when absent.
    pub covariates: Option<Vec<String>>,
    /// Response columns are named `<prefix><location>`.
    pub response_prefix: String,
    /// Prepend a constant covariate equal to one.
    pub intercept: bool,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            covariates: None,
            response_prefix: "y@".to_string(),
            intercept: false,
        }
    }
}

/// When the running estimate is written to the trajectory table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    /// n = 1, 2, 4, 8, ...
    #[default]
    Geometric,
    /// Every multiple of the given count.
    Every(u64),
    Off,
}

impl Trajectory {
    pub fn records(self, n: u64) -> bool {
        match self {
            Trajectory::Geometric => n.is_power_of_two(),
            Trajectory::Every(k) => k > 0 && n % k == 0,
            Trajectory::Off => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schedule: StepSchedule,
    pub norm: ResidualNorm,
    /// Bootstrap chains; zero turns inference off.
    pub chains: usize,
    /// Band levels `tau`, each producing `(1 - tau)` bands.
    pub tau: Vec<f64>,
    /// Simulation design; its `seed` is replaced per replication.
    pub dgp: DgpConfig,
    pub replications: usize,
    pub seed: u64,
    /// Worker threads; zero lets the pool decide.
    pub threads: usize,
    /// Run the bootstrap chains of one stream in parallel.
    pub parallel_chains: bool,
    pub input: Option<PathBuf>,
    pub mapping: ColumnMapping,
    pub standardize: bool,
    pub on_malformed: MalformedPolicy,
    /// State snapshot written after `fit` and read by `infer`.
    pub snapshot: Option<PathBuf>,
    /// Snapshot to continue from in `fit`.
    pub resume: Option<PathBuf>,
    /// Size of the uniform grid bands and estimates are interpolated onto.
    pub output_grid: Option<usize>,
    pub trajectory: Trajectory,
    /// Offline comparators in `benchmark`.
    pub offline_max_iterations: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schedule: StepSchedule::default(),
            norm: ResidualNorm::default(),
            chains: 500,
            tau: vec![0.1, 0.05],
            dgp: DgpConfig::default(),
            replications: 200,
            seed: 0,
            threads: 0,
            parallel_chains: false,
            input: None,
            mapping: ColumnMapping::default(),
            standardize: false,
            on_malformed: MalformedPolicy::default(),
            snapshot: None,
            resume: None,
            output_grid: None,
            trajectory: Trajectory::default(),
            offline_max_iterations: 500,
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub snapshot: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).at(path)?;
        Self::from_json(&text)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(t) = o.threads {
            self.threads = t;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(p) = &o.input {
            self.input = Some(p.clone());
        }
        if let Some(p) = &o.snapshot {
            self.snapshot = Some(p.clone());
        }
    }

    pub fn validate(&self, mode: Mode) -> Result<()> {
        self.schedule.validate()?;
        if let Some(t) = self.tau.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
            return Err(CliError::Config(format!("tau {t} outside (0, 1)")));
        }
        if self.chains == 1 {
            return Err(CliError::Config("bands need at least two chains".into()));
        }
        if let Some(g) = self.output_grid {
            if g < 2 {
                return Err(CliError::Config("output_grid needs at least two points".into()));
            }
        }
        match mode {
            Mode::Simulate | Mode::Benchmark => {
                self.dgp.validate()?;
                if self.replications == 0 {
                    return Err(CliError::Config("replications must be positive".into()));
                }
                if mode == Mode::Benchmark && self.offline_max_iterations == 0 {
                    return Err(CliError::Config("offline_max_iterations must be positive".into()));
                }
            }
            Mode::Fit => {
                if self.input.is_none() {
                    return Err(CliError::Config("fit requires `input`".into()));
                }
            }
            Mode::Infer => {
                if self.snapshot.is_none() {
                    return Err(CliError::Config("infer requires `snapshot`".into()));
                }
                if self.chains == 0 {
                    return Err(CliError::Config("infer requires bootstrap chains".into()));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_document_keeps_defaults() {
        let c = RunConfig::from_json(r#"{"chains": 20, "dgp": {"n": 500, "tail": "student_t3"}}"#).unwrap();
        assert_eq!(c.chains, 20);
        assert_eq!(c.dgp.n, 500);
        assert_eq!(c.dgp.m, 50);
        assert_eq!(c.dgp.tail, fosr_gm::Tail::StudentT3);
        assert_eq!(c.schedule, StepSchedule::default());
        assert_eq!(c.trajectory, Trajectory::Geometric);
    }

    #[test]
    fn unknown_field_rejected() {
        assert!(RunConfig::from_json(r#"{"chians": 3}"#).is_err());
    }

    #[test]
    fn overrides_win() {
        let mut c = RunConfig::from_json(r#"{"seed": 4, "threads": 2}"#).unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            out: Some("x".into()),
            ..Overrides::default()
        });
        assert_eq!(c.seed, 9);
        assert_eq!(c.threads, 2);
        assert_eq!(c.out, PathBuf::from("x"));
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate(Mode::Simulate).is_ok());
        assert!(c.validate(Mode::Fit).is_err());
        c.tau = vec![1.0];
        assert!(c.validate(Mode::Simulate).is_err());
        let c = RunConfig {
            schedule: StepSchedule { gamma: 1.0, alpha: 0.4 },
            ..RunConfig::default()
        };
        assert!(c.validate(Mode::Simulate).is_err());
    }

    #[test]
    fn trajectory_strides() {
        let hits: Vec<u64> = (1..=20).filter(|n| Trajectory::Geometric.records(*n)).collect();
        assert_eq!(hits, vec![1, 2, 4, 8, 16]);
        let hits: Vec<u64> = (1..=20).filter(|n| Trajectory::Every(20).records(*n)).collect();
        assert_eq!(hits, vec![20]);
        assert!(!Trajectory::Off.records(1));
    }
}
