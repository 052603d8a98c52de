//! Experiment orchestration: configs, model sources, replicated Monte Carlo
//! sweeps, and atomic report output.

pub mod config;
pub mod model;
pub mod mtg;
pub mod run;
pub mod td;

pub use config::{ExperimentConfig, ExperimentKind, TdParams, SCHEMA_VERSION};
pub use model::{
    analyze_chain, generate_random_mrp, ChainAnalysis, ChainSpec, ModelSource, ModelSpec, RandomMrpSpec,
};
pub use run::{run_experiment, run_td, write_atomic, ExperimentReport};
pub use td::{
    coverage_experiment, coverage_table, discrepancy_summary, limiting_covariance, rate_summary, simulate_td,
    CoverageRow, DiscrepancyParams, DiscrepancySummary, RateSummary, TdSweep,
};
