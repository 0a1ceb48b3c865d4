//! Scenario files and the Monte Carlo sweeps that turn them into CSV.

pub mod config;
pub mod evaluate;
pub mod output;
pub mod presets;

pub use config::{
    ChannelModels, DesignChoice, Distances, NoiseDbm, PathLossLaw, PlacementKind, PointParams, ScenarioConfig,
    ScenarioFile, Sweep, SweepAxis,
};
pub use evaluate::{aligned_composite, evaluate_trial, plan_request, realize, Realization, TrialOutcome};
pub use output::{
    format_g12, metadata_toml, read_records, records_to_csv, run_file, run_scenario, summarize, summarize_file,
    summary_to_csv, write_atomic, SummaryRow, SweepRecord,
};
pub use presets::{assumed_defaults, preset, PRESET_NAMES};
