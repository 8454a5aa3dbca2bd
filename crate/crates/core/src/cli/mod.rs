//! Command surface: run configuration, pipeline stages, commands and the
//! HTTP retrieval service.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;
pub mod serve;

pub use commands::{
    cmd_baseline, cmd_build_dataset, cmd_eval, cmd_gen_corpus, cmd_index, cmd_report, cmd_retrieve, cmd_run,
    cmd_train, Layout, Manifest, RunSummary, TrainSummary,
};
pub use config::{preset, EvalConfig, Preset, RunConfig, Seeds, PRESETS};
