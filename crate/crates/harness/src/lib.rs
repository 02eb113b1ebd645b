//! Experiment orchestration for `qtompc-core`: configuration, Monte Carlo
//! runs, aggregate statistics, comparison tables and bound reports.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod lstar;
pub mod report;
pub mod stats;

pub use compare::{run_compare, CompareCell, CompareTable};
pub use config::{Algorithm, ExperimentConfig, Uncertainty};
pub use experiment::{run_experiment, trial_setup, write_artifacts, Artifacts, Experiment, TrialOutcome, STEPS_HEADER};
pub use lstar::{lstar_study, LstarStudy};
pub use report::{bounds_csv, bounds_report, bounds_text, BoundsRow};
pub use stats::{binomial_sigma, SummaryStats};
