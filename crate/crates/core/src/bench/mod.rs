//! Baseline optimisers, the experiment harness, random-search sweeps and
//! plot output.

pub mod baselines;
pub mod config;
pub mod experiment;
pub mod sweep;
pub mod plot;

pub use baselines::{Baseline, BaselineHyper, BaselineKind};
pub use config::{
    Config, ExperimentConfig, ObjectiveKey, ObjectiveSpec, OptimiserKind, OptimiserSpec, ParamRange, RunSettings,
    SweepSpec,
};
pub use experiment::{
    format_pm, mean_std, read_records_dir, read_run_csv, run_experiment, run_single, summary_table, Aggregate, Row,
    RunRecord, Summary,
};
pub use plot::{boltzmann_curves, curve_bands, emit_curves, plot_boltzmann, BoltzmannCurves, CurveBand};
pub use sweep::{leaderboard_table, sweep, SweepEntry, SweepResult};
