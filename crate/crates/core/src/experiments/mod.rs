//! Seeded Monte Carlo sweeps over bit budgets and their result files.

mod config;
mod output;
mod sweep;

pub use config::{
    Method, OutputFormat, ScenarioSpec, SweepConfig, BUILTIN_PRESETS, SCHEMA_VERSION,
};
pub use output::{emit_results, load_json, write_csv, write_json};
pub use sweep::{
    run_channel_sweep, run_eig_sweep, run_sweep, run_sweep_with_threads, BuiltScenario, SweepRecord,
};
