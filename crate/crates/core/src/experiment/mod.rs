//! Runners and file formats behind the `adas` command-line tool.

pub mod config;
pub mod probe;
pub mod report;
pub mod run;
pub mod theory_check;

pub use config::{DataSource, OptimizerKind, RunConfig};
pub use probe::{probe_snapshots, ProbeReport, ProbeRow};
pub use report::{metrics_csv, CSV_HEADER};
pub use run::{load_data, run_experiment, snapshot_name, train_with, RunSummary};
pub use theory_check::{theory_check, TheoryCheckConfig, TheoryReport};
