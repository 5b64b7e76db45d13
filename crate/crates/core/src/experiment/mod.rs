//! Experiment files, checkpoints and the drivers behind each subcommand.

mod checkpoint;
mod config;
mod run;

pub use checkpoint::{
    checkpoint_from_text, checkpoint_to_text, config_dims, load_checkpoint, save_checkpoint, Architecture, Checkpoint,
    Objective, FORMAT_VERSION,
};
pub use config::{config_keys, dump_config, parse_config, parse_config_str, EnvChoice, ExperimentConfig, ObjectiveKind};
pub use run::{
    derive_seed, load_objective, manifest_text, metrics_csv, pair_horizon, read_trace_dir, run_analyze, run_meta_test,
    run_meta_train, trace_file_name, AnalysisOutput, Command, LifetimeRecord, MetaTrainRun, TaskSource,
    GENERATION_HEADER, METRICS_HEADER, SUMMARY_HEADER,
};
