//! Closed-loop simulation: scenario files, traces, the run loop and the
//! regulating-energy metrics.

mod config;
mod run;
mod trace;

use std::path::PathBuf;

use thiserror::Error;

use crate::grid::GridError;
use crate::optimizer::StepError;

pub use config::{ScenarioConfig, ScenarioSpec, TraceSource};
pub use run::{
    energy_metrics, read_records, run_scenario, write_records, EnergyReport, RunSummary, ScenarioRun,
};
pub use trace::{generate_trace, read_trace, write_trace, GeneratorSpec, TRACE_HEADER};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("scenario file line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("trace: {0}")]
    Trace(String),
    #[error("trace has {got} samples, the horizon needs {needed}")]
    ShortTrace { needed: usize, got: usize },
    #[error("no records to evaluate")]
    NoRecords,
    #[error(transparent)]
    Step(#[from] StepError),
    #[error(transparent)]
    Grid(#[from] GridError),
}
