use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fosr_gm_cli::{run, Mode, Overrides, RunConfig};

/// Online geometric-median function-on-scalar regression.
#[derive(Parser, Debug)]
#[command(name = "fosr-gm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; flags below override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo replications of the simulation design.
    Simulate,
    /// Stream a CSV file through the estimator and export bands.
    Fit {
        /// Input CSV (overrides `input` in the config).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Write the final state snapshot here.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Bands from a saved state snapshot.
    Infer {
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
    /// Online against offline estimators on simulated data.
    Benchmark,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = Overrides {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
        ..Overrides::default()
    };
    let mode = match cli.command {
        Command::Simulate => Mode::Simulate,
        Command::Fit { input, snapshot } => {
            overrides.input = input;
            overrides.snapshot = snapshot;
            Mode::Fit
        }
        Command::Infer { snapshot } => {
            overrides.snapshot = snapshot;
            Mode::Infer
        }
        Command::Benchmark => Mode::Benchmark,
    };

    let mut config = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::FAILURE;
            }
        },
        None => RunConfig::default(),
    };
    config.apply(&overrides);

    match run(mode, &config) {
        Ok(report) => {
            eprintln!(
                "{} finished in {:.2}s, report in {}",
                mode.name(),
                report.runtime.seconds,
                config.out.join("report.json").display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
