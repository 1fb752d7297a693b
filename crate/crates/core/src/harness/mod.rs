//! Configured experiment runs and their on-disk artifacts.

pub mod artifact;
pub mod checkpoint;
pub mod compare;
pub mod config;
pub mod train;

pub use artifact::{EpochRow, RunArtifact, RunStatus, RunSummary};
pub use compare::{compare_runs, run_sweep, CompareReport, EnsembleReport, Sweep};
pub use config::{Monitor, RunConfig, TaskConfig};
pub use train::train_run;
