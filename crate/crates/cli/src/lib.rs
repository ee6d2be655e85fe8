//! Experiment harness: benchmark runs, root-cause probes and hyperparameter
//! sweeps, written as tidy CSV plus JSON summaries.

pub mod config;
pub mod error;
pub mod output;
pub mod probe;
pub mod run;
pub mod stats;
pub mod sweep;

pub use config::{Command, DatasetSpec, ExperimentConfig, Prepared, ProbeParams, SweepParams};
pub use error::{HarnessError, Result};
pub use probe::{probe_file, ProbeKind};
pub use run::{run_file, RunOptions};
pub use sweep::{sweep_file, SweepParam};
