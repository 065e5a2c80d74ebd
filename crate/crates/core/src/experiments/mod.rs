//! Declarative experiment protocols and their execution.
//!
//! A config names one protocol, a backend, loop settings, a repeat count and
//! a master seed. Every random quantity is derived from the master seed by
//! label path (see [`crate::seed`]):
//!
//! | quantity                        | path                          |
//! |---------------------------------|-------------------------------|
//! | initial archive of repeat `r`   | `run / r`                     |
//! | backend session of repeat `r`   | `backend / r`                 |
//! | random TSP instance, `N` cities | `instance / N`                |
//! | continuous shift                | `shift`                       |
//! | TSP prompt view                 | `view / <mode>`               |
//!
//! Run seeds are shared by every arm and sweep point, so arms differ only in
//! the variable under study, and any point re-run alone reproduces exactly.

mod config;
mod probe;
mod runner;

use thiserror::Error;

pub use config::{
    ExperimentConfig, ProblemEntry, PromptSettings, Protocol, SamplingProbeConfig, ProbeShift,
    TspFixture, TspSpec, SCHEMA_VERSION,
};
pub use probe::{
    chi_square_uniform, grid_artifact_score, probe_archive, run_sampling_probe, ProbeArtifacts,
    ProbeResult, CHI_SQUARE_BINS, PROBE_ARCHIVE_SEED,
};
pub use runner::{
    run_experiment, write_output, ExperimentOutput, MetricKind, PointInfo, RunArtifacts, RunResult,
};

use crate::backends::BackendError;
use crate::engine::EngineError;
use crate::oracle::OracleError;
use crate::problems::ProblemError;
use crate::prompting::PromptError;
use crate::reporting::ReportError;
use crate::tsp::TspError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("config is not valid JSON for this schema (line {line}, column {column}): {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Tsp(#[from] TspError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{0}")]
    Io(String),
}

impl ExperimentError {
    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ExperimentError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(context: impl std::fmt::Display, err: impl std::fmt::Display) -> Self {
        ExperimentError::Io(format!("{context}: {err}"))
    }

    /// Errors a user fixes by editing the config.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            ExperimentError::Config { .. }
                | ExperimentError::Parse { .. }
                | ExperimentError::Problem(_)
                | ExperimentError::Backend(BackendError::Config(_))
        )
    }
}
