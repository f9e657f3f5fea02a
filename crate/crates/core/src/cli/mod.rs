//! Command surface: configuration, persistence and the five commands.
//!
//! Every command writes into an output directory (`--out`, else
//! `EXTREMITY_OUT`, else `runs`) and finishes with a `manifest.json` that
//! checksums everything it wrote.

mod args;
mod checkpoint;
mod commands;
mod config;
mod io;
mod manifest;

pub use args::{main_with_args, run, AnalyzeArgs, Cli, Command, CommonArgs, EvalArgs, GradcheckArgs};
pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub use commands::{
    cmd_analyze, cmd_eval, cmd_gradcheck, cmd_reproduce, cmd_train, AnalyzeOutcome, EvalOptions, EvalOutcome,
    GradcheckOutcome, GridRow, GridTable, ReproduceOutcome, RunOptions, TrainOutcome, TrialSummary,
};
pub use config::{config_to_text, parse_switch, ConfigOverrides, CONFIG_KEYS};
pub use io::{
    read_eval_records, read_training_log, write_eval_records, write_training_log, EVAL_RECORDS_HEADER,
    TRAINING_LOG_HEADER,
};
pub use manifest::{sha256_file, write_json, FileEntry, RunManifest, TrialSeed, BUILD_ID, MANIFEST_FILE};

use std::path::Path;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::trainer::TrainError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: schema mismatch: {message}")]
    Schema { path: String, message: String },
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{0}: {1}")]
    Json(String, serde_json::Error),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        CliError::Csv { path: path.display().to_string(), source }
    }
}
