//! Scenario files, replicated experiments and CSV reports.

pub mod experiment;
pub mod report;
pub mod scenario;

pub use experiment::{compare_schemes, run_experiment, Aggregate, Experiment, ReplicaRow, RunOptions, WORKERS_ENV};
pub use report::{mean_ci95, sig6, write_summary, write_trace};
pub use scenario::{load_scenario, parse_scenario, Mode, Scenario, Scheme, Sweep, SweepKey, SweepValue};
