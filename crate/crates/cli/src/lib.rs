//! File formats, configuration and command drivers around `fosr-gm`.

pub mod config;
pub mod error;
pub mod run;
pub mod snapshot;
pub mod table;

pub use config::{ColumnMapping, MalformedPolicy, Mode, Overrides, RunConfig, Trajectory};
pub use error::{CliError, Result};
pub use run::{run, run_benchmark, run_fit, run_infer, run_simulate, Report};
pub use table::{load_stream, write_samples, DropCounts, SampleReader};
