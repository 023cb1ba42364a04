//! The four commands. Each returns its report after writing it to `out`.

use std::fs;
use std::path::Path;
use std::time::Instant;

use fosr_gm::band::BandMethod;
use fosr_gm::metrics::{rmise_all, CoverageCounter};
use fosr_gm::rng::derive_seed;
use fosr_gm::{
    fit_gm_offline, fit_ls_offline, fit_stream, generate_dataset, interpolate_field, summarize, CoefficientField,
    ConfidenceBand, FitConfig, FunctionalSample, GmState, Grid, InferenceEngine, OracleConfig, ReplicationSummary,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Mode, RunConfig};
use crate::error::{CliError, IoContext, Result};
use crate::snapshot;
use crate::table::{self, fmt17, DropCounts};

/// Execution details that may differ between otherwise identical runs.
#[derive(Debug, Clone, Serialize)]
pub struct Runtime {
    pub threads: usize,
    pub parallel_chains: bool,
    pub out: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageSummary {
    pub method: BandMethod,
    pub level: f64,
    pub mean: f64,
    /// Share of cells within three percentage points of the nominal level.
    pub within_3pp: f64,
    /// `cells[j][l]`.
    pub cells: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationResults {
    pub rmise: ReplicationSummary,
    pub coverage: Vec<CoverageSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResults {
    pub observations: u64,
    pub rows_read: u64,
    pub coefficients: Vec<String>,
    pub grid_len: usize,
    pub output_grid_len: usize,
    pub bands: usize,
    pub trajectory_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkResults {
    pub online_gm: ReplicationSummary,
    pub offline_gm: ReplicationSummary,
    pub offline_ls: ReplicationSummary,
    /// Mean online RMISE over mean offline geometric-median RMISE, per coefficient.
    pub online_over_offline: Vec<f64>,
    pub offline_converged: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Results {
    Simulate(SimulationResults),
    Fit(FitResults),
    Benchmark(BenchmarkResults),
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: Mode,
    pub seed: u64,
    /// The configuration that was run, minus the fields kept in `runtime`.
    pub config: serde_json::Value,
    pub drops: DropCounts,
    pub results: Results,
    pub runtime: Runtime,
}

impl Report {
    fn new(mode: Mode, cfg: &RunConfig, drops: DropCounts, results: Results, started: Instant) -> Result<Self> {
        let mut config = serde_json::to_value(cfg)?;
        if let Some(map) = config.as_object_mut() {
            for key in ["threads", "parallel_chains", "out"] {
                map.remove(key);
            }
        }
        Ok(Self {
            tool: "fosr-gm",
            version: env!("CARGO_PKG_VERSION"),
            mode,
            seed: cfg.seed,
            config,
            drops,
            results,
            runtime: Runtime {
                threads: cfg.threads,
                parallel_chains: cfg.parallel_chains,
                out: cfg.out.display().to_string(),
                seconds: started.elapsed().as_secs_f64(),
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// The report without its `runtime` section; equal across thread counts.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(map) = v.as_object_mut() {
            map.remove("runtime");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("report.json");
        fs::write(&path, self.to_json()? + "\n").at(path)
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::ThreadPool(e.to_string()))
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).at(dir)
}

/// Advances the estimator and every chain by one observation, spreading the
/// chains over the current thread pool when `parallel` is set.
pub fn observe(engine: &mut InferenceEngine, sample: &FunctionalSample, parallel: bool) -> Result<()> {
    if parallel && engine.chain_count() > 1 {
        engine.observe_with(sample, |chains, ctx| {
            let chunk = chains.len().div_ceil(rayon::current_num_threads()).max(1);
            chains.par_chunks_mut(chunk).for_each(|part| {
                for c in part {
                    c.step(ctx);
                }
            });
        })?;
    } else {
        engine.observe(sample)?;
    }
    Ok(())
}

/// Seeds of replication `r`: the dataset and the bootstrap multipliers.
pub fn replication_seeds(master: u64, r: usize) -> (u64, u64) {
    let r = r as u64;
    (derive_seed(master, 2 * r), derive_seed(master, 2 * r + 1))
}

/// Both band types at every configured level, percentile first.
pub fn all_bands(engine: &InferenceEngine, taus: &[f64]) -> Result<Vec<ConfidenceBand>> {
    let mut out = Vec::with_capacity(2 * taus.len());
    for method in [BandMethod::Percentile, BandMethod::Variance] {
        for &tau in taus {
            out.push(engine.band(method, tau)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ReplicationOutcome {
    pub data_seed: u64,
    pub estimate: CoefficientField,
    pub truth: CoefficientField,
    pub rmise: Vec<f64>,
    /// Empty when inference is off.
    pub bands: Vec<ConfidenceBand>,
}

/// One simulated dataset pushed through the online estimator, with
/// bootstrap bands when `cfg.chains > 0`.
pub fn replicate(cfg: &RunConfig, r: usize) -> Result<ReplicationOutcome> {
    let (data_seed, boot_seed) = replication_seeds(cfg.seed, r);
    let dgp = fosr_gm::DgpConfig {
        seed: data_seed,
        ..cfg.dgp
    };
    let data = generate_dataset(&dgp)?;
    let truth = data.truth().clone();
    let grid = data.grid().clone();
    let (estimate, bands) = if cfg.chains == 0 {
        let fit = FitConfig {
            schedule: cfg.schedule,
            norm: cfg.norm,
            ..FitConfig::default()
        };
        (fit_stream(&grid, data, &fit)?.average().clone(), Vec::new())
    } else {
        let gm = GmState::zeros(truth.dim(), grid, cfg.schedule)?.with_norm(cfg.norm);
        let mut engine = InferenceEngine::new(gm, cfg.chains, boot_seed)?;
        for s in data {
            observe(&mut engine, &s, cfg.parallel_chains)?;
        }
        let bands = all_bands(&engine, &cfg.tau)?;
        (engine.estimate().clone(), bands)
    };
    Ok(ReplicationOutcome {
        data_seed,
        rmise: rmise_all(&estimate, &truth)?,
        estimate,
        truth,
        bands,
    })
}

fn rmise_header(prefix: &[&str], d: usize) -> Vec<String> {
    prefix
        .iter()
        .map(|s| s.to_string())
        .chain((1..=d).map(|k| format!("rmise_{k}")))
        .collect()
}

pub fn run_simulate(cfg: &RunConfig) -> Result<Report> {
    cfg.validate(Mode::Simulate)?;
    let started = Instant::now();
    prepare_out(&cfg.out)?;
    let outcomes = pool(cfg.threads)?.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| replicate(cfg, r))
            .collect::<Result<Vec<_>>>()
    })?;

    let rows: Vec<Vec<f64>> = outcomes.iter().map(|o| o.rmise.clone()).collect();
    let rmise = summarize(&rows)?;

    let mut coverage = Vec::new();
    if cfg.chains > 0 {
        let truth = &outcomes[0].truth;
        let kinds = outcomes[0].bands.len();
        for k in 0..kinds {
            let mut counter = CoverageCounter::new(truth);
            for o in &outcomes {
                counter.add(&o.bands[k], truth)?;
            }
            let map = counter.finish()?;
            let band = &outcomes[0].bands[k];
            coverage.push(CoverageSummary {
                method: band.method,
                level: band.level(),
                mean: map.mean(),
                within_3pp: map.fraction_within(band.level(), 0.03),
                cells: map.proportions.chunks(map.grid_len).map(<[f64]>::to_vec).collect(),
            });
        }
    }

    let d = cfg.dgp_dim();
    let table: Vec<Vec<String>> = outcomes
        .iter()
        .enumerate()
        .map(|(r, o)| {
            [r.to_string(), o.data_seed.to_string()]
                .into_iter()
                .chain(o.rmise.iter().map(|v| fmt17(*v)))
                .collect()
        })
        .collect();
    table::write_rows(&cfg.out.join("replications.csv"), &rmise_header(&["replication", "seed"], d), &table)?;

    let report = Report::new(
        Mode::Simulate,
        cfg,
        DropCounts::default(),
        Results::Simulate(SimulationResults { rmise, coverage }),
        started,
    )?;
    report.write(&cfg.out)?;
    Ok(report)
}

/// Interpolates a band's limits and keeps them ordered cell by cell.
fn interpolate_band(band: &ConfidenceBand, query: &Grid) -> Result<ConfidenceBand> {
    let mut lower = interpolate_field(&band.lower, query)?;
    let mut upper = interpolate_field(&band.upper, query)?;
    for (lo, hi) in lower.values_mut().iter_mut().zip(upper.values_mut()) {
        if *lo > *hi {
            std::mem::swap(lo, hi);
        }
    }
    Ok(ConfidenceBand {
        method: band.method,
        tau: band.tau,
        lower,
        upper,
    })
}

fn export_estimate(cfg: &RunConfig, labels: &[String], engine: &InferenceEngine) -> Result<(usize, usize)> {
    let bands = if engine.chain_count() >= 2 {
        all_bands(engine, &cfg.tau)?
    } else {
        Vec::new()
    };
    let (estimate, bands) = match cfg.output_grid {
        Some(m) => {
            let query = Grid::uniform(m)?;
            let bands = bands
                .iter()
                .map(|b| interpolate_band(b, &query))
                .collect::<Result<Vec<_>>>()?;
            (interpolate_field(engine.estimate(), &query)?, bands)
        }
        None => (engine.estimate().clone(), bands),
    };
    table::write_field(&cfg.out.join("estimate.csv"), labels, &estimate)?;
    if !bands.is_empty() {
        table::write_bands(&cfg.out.join("bands.csv"), labels, &estimate, &bands)?;
    }
    Ok((estimate.grid_len(), bands.len()))
}

pub fn run_fit(cfg: &RunConfig) -> Result<Report> {
    cfg.validate(Mode::Fit)?;
    let started = Instant::now();
    prepare_out(&cfg.out)?;
    let input = cfg.input.as_deref().expect("validated");
    let mut reader = table::load_stream(input, &cfg.mapping, cfg.on_malformed, cfg.standardize)?;
    let layout = reader.layout().clone();
    let labels = layout.labels();

    let mut engine = match &cfg.resume {
        Some(path) => {
            let e = snapshot::load(path)?;
            if e.estimator().dim() != layout.dim() || !e.estimator().grid().same_as(&layout.grid) {
                return Err(CliError::Snapshot("snapshot shape does not match the input columns".into()));
            }
            e
        }
        None => {
            let gm = GmState::zeros(layout.dim(), layout.grid.clone(), cfg.schedule)?.with_norm(cfg.norm);
            InferenceEngine::new(gm, cfg.chains, derive_seed(cfg.seed, 1))?
        }
    };

    let mut trajectory = Vec::new();
    let run = pool(cfg.threads)?.install(|| -> Result<()> {
        for sample in reader.by_ref() {
            observe(&mut engine, &sample?, cfg.parallel_chains)?;
            if cfg.trajectory.records(engine.count()) {
                trajectory.push((engine.count(), engine.estimate().clone()));
            }
        }
        Ok(())
    });
    run?;
    if engine.count() == 0 {
        return Err(CliError::EmptyInput);
    }

    let (output_grid_len, bands) = export_estimate(cfg, &labels, &engine)?;
    if !trajectory.is_empty() {
        table::write_trajectory(&cfg.out.join("trajectory.csv"), &labels, &trajectory)?;
    }
    if let Some(path) = &cfg.snapshot {
        snapshot::save(&engine, path)?;
    }

    let results = FitResults {
        observations: engine.count(),
        rows_read: reader.rows(),
        coefficients: labels,
        grid_len: layout.grid.len(),
        output_grid_len,
        bands,
        trajectory_points: trajectory.len(),
    };
    let report = Report::new(Mode::Fit, cfg, reader.drops(), Results::Fit(results), started)?;
    report.write(&cfg.out)?;
    Ok(report)
}

pub fn run_infer(cfg: &RunConfig) -> Result<Report> {
    cfg.validate(Mode::Infer)?;
    let started = Instant::now();
    prepare_out(&cfg.out)?;
    let engine = snapshot::load(cfg.snapshot.as_deref().expect("validated"))?;
    let labels: Vec<String> = (1..=engine.estimator().dim()).map(|j| format!("beta{j}")).collect();
    let (output_grid_len, bands) = export_estimate(cfg, &labels, &engine)?;
    let results = FitResults {
        observations: engine.count(),
        rows_read: 0,
        coefficients: labels,
        grid_len: engine.estimator().grid().len(),
        output_grid_len,
        bands,
        trajectory_points: 0,
    };
    let report = Report::new(Mode::Infer, cfg, DropCounts::default(), Results::Fit(results), started)?;
    report.write(&cfg.out)?;
    Ok(report)
}

/// RMISE of the online, offline geometric-median and least-squares fits on
/// one simulated dataset, plus whether the offline solver converged.
pub fn benchmark_replication(cfg: &RunConfig, r: usize) -> Result<([Vec<f64>; 3], bool)> {
    let (data_seed, _) = replication_seeds(cfg.seed, r);
    let dgp = fosr_gm::DgpConfig {
        seed: data_seed,
        ..cfg.dgp
    };
    let data = generate_dataset(&dgp)?;
    let truth = data.truth().clone();
    let grid = data.grid().clone();
    let samples: Vec<FunctionalSample> = data.collect();
    let fit = FitConfig {
        schedule: cfg.schedule,
        norm: cfg.norm,
        ..FitConfig::default()
    };
    let online = fit_stream(&grid, &samples, &fit)?;
    let oracle = OracleConfig {
        max_iterations: cfg.offline_max_iterations,
        ..OracleConfig::default()
    };
    let gm = fit_gm_offline(&grid, &samples, &oracle)?;
    let ls = fit_ls_offline(&grid, &samples)?;
    Ok((
        [
            rmise_all(online.average(), &truth)?,
            rmise_all(&gm.field, &truth)?,
            rmise_all(&ls, &truth)?,
        ],
        gm.converged,
    ))
}

pub fn run_benchmark(cfg: &RunConfig) -> Result<Report> {
    cfg.validate(Mode::Benchmark)?;
    let started = Instant::now();
    prepare_out(&cfg.out)?;
    let outcomes = pool(cfg.threads)?.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|r| benchmark_replication(cfg, r))
            .collect::<Result<Vec<_>>>()
    })?;

    let per_method = |k: usize| outcomes.iter().map(|o| o.0[k].clone()).collect::<Vec<_>>();
    let online_gm = summarize(&per_method(0))?;
    let offline_gm = summarize(&per_method(1))?;
    let offline_ls = summarize(&per_method(2))?;
    let online_over_offline = online_gm.mean.iter().zip(&offline_gm.mean).map(|(a, b)| a / b).collect();

    let d = cfg.dgp_dim();
    let mut table = Vec::with_capacity(3 * outcomes.len());
    for (r, (rows, _)) in outcomes.iter().enumerate() {
        let seed = replication_seeds(cfg.seed, r).0.to_string();
        for (name, row) in ["online_gm", "offline_gm", "offline_ls"].iter().zip(rows) {
            let line = [r.to_string(), seed.clone(), name.to_string()]
                .into_iter()
                .chain(row.iter().map(|v| fmt17(*v)))
                .collect();
            table.push(line);
        }
    }
    table::write_rows(
        &cfg.out.join("benchmark.csv"),
        &rmise_header(&["replication", "seed", "method"], d),
        &table,
    )?;

    let results = BenchmarkResults {
        online_gm,
        offline_gm,
        offline_ls,
        online_over_offline,
        offline_converged: outcomes.iter().filter(|o| o.1).count(),
    };
    let report = Report::new(Mode::Benchmark, cfg, DropCounts::default(), Results::Benchmark(results), started)?;
    report.write(&cfg.out)?;
    Ok(report)
}

pub fn run(mode: Mode, cfg: &RunConfig) -> Result<Report> {
    match mode {
        Mode::Simulate => run_simulate(cfg),
        Mode::Fit => run_fit(cfg),
        Mode::Infer => run_infer(cfg),
        Mode::Benchmark => run_benchmark(cfg),
    }
}

impl RunConfig {
    fn dgp_dim(&self) -> usize {
        fosr_gm::dgp::COVARIATES
    }
}
