//! Solution generators: remote chat models, scripted and replayed
//! responders for deterministic tests, and classical baselines.
//!
//! A [`Backend`] is shared across runs; each run opens its own [`Session`],
//! which owns all per-run state (counters, random streams, transcript
//! cursor).

mod baselines;
mod remote;
mod replay;
mod scripted;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use baselines::{HillClimbBackend, RandomSearchBackend};
pub use remote::{ChatMessage, ChatRequest, RemoteChatBackend, RemoteChatConfig};
pub use replay::{
    config_hash, record_transcript, ReplayBackend, Transcript, TranscriptEntry, TranscriptHeader,
    TRANSCRIPT_SUFFIX,
};
pub use scripted::{nearest_neighbor_tour, ScriptedBackend, ScriptedPolicy, REFUSAL};

/// A solution in problem-agnostic form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Vector(Vec<f64>),
    Tour(Vec<usize>),
}

/// Problem facts available to a generator besides the prompt text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemContext {
    Continuous {
        dimension: usize,
        lower: f64,
        upper: f64,
        /// Global minimizer; only oracle-fed scripted policies read it.
        optimum: Vec<f64>,
        /// Decimal digits the prompt shows numbers with, when known.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        display_digits: Option<u32>,
    },
    Tsp {
        n_cities: usize,
        /// Coordinates as shown in the prompt, if any.
        displayed: Option<Vec<[f64; 2]>>,
        optimal_tour: Option<Vec<usize>>,
    },
}

#[derive(Debug, Clone, Copy)]
pub struct QueryContext<'a> {
    pub problem: &'a ProblemContext,
    /// Archive contents, worst → best.
    pub history: &'a [(Payload, f64)],
}

impl<'a> QueryContext<'a> {
    pub fn best(&self) -> Option<&'a Payload> {
        self.history.last().map(|(p, _)| p)
    }
}

/// Identifies the run a session belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RunKey {
    pub label: String,
    pub seed: u64,
}

impl RunKey {
    pub fn new(label: impl Into<String>, seed: u64) -> Self {
        Self {
            label: label.into(),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BackendErrorKind {
    Transport,
    Api,
    ContextLength,
    Exhausted,
    Unsupported,
}

impl fmt::Display for BackendErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("API error (HTTP {status}): {message}")]
    Api { status: u16, message: String },
    #[error("context length exceeded: {0}")]
    ContextLength(String),
    #[error("transcript exhausted after {0} responses")]
    Exhausted(usize),
    #[error("unsupported request: {0}")]
    Unsupported(String),
    /// An error reproduced from a transcript, with its original message.
    #[error("{message}")]
    Replayed {
        kind: BackendErrorKind,
        message: String,
    },
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("cannot record a transcript of a run without queries")]
    EmptyRun,
    #[error("transcript I/O: {0}")]
    Io(String),
}

impl BackendError {
    /// Classification used in run records.
    pub fn kind(&self) -> BackendErrorKind {
        match self {
            BackendError::Transport(_) | BackendError::Io(_) => BackendErrorKind::Transport,
            BackendError::ContextLength(_) => BackendErrorKind::ContextLength,
            BackendError::Exhausted(_) => BackendErrorKind::Exhausted,
            BackendError::Unsupported(_) => BackendErrorKind::Unsupported,
            BackendError::Replayed { kind, .. } => *kind,
            BackendError::Api { .. }
            | BackendError::MissingApiKey(_)
            | BackendError::Config(_)
            | BackendError::EmptyRun => BackendErrorKind::Api,
        }
    }
}

pub trait Session {
    /// Raw reply text for one single-turn prompt.
    fn generate(&mut self, prompt: &str, ctx: &QueryContext<'_>) -> Result<String, BackendError>;
}

pub trait Backend: Send + Sync {
    fn name(&self) -> String;
    fn open_session(&self, run: &RunKey) -> Result<Box<dyn Session + '_>, BackendError>;
}

fn default_sigma() -> f64 {
    0.1
}

/// Backend declaration in an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    RemoteChat(RemoteChatConfig),
    Scripted(ScriptedPolicy),
    /// Replays `runs/<label>.transcript.jsonl` files from a run directory.
    Replay { dir: PathBuf },
    RandomSearch,
    HillClimb {
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn Backend>, BackendError> {
        Ok(match self {
            BackendSpec::RemoteChat(cfg) => Box::new(RemoteChatBackend::new(cfg.clone())?),
            BackendSpec::Scripted(policy) => Box::new(ScriptedBackend::new(policy.clone())),
            BackendSpec::Replay { dir } => Box::new(ReplayBackend::from_dir(dir)?),
            BackendSpec::RandomSearch => Box::new(RandomSearchBackend),
            BackendSpec::HillClimb { sigma } => Box::new(HillClimbBackend::new(*sigma)?),
        })
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        match self {
            BackendSpec::RemoteChat(cfg) => cfg.validate(),
            BackendSpec::HillClimb { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => {
                Err(BackendError::Config(format!("sigma must be positive, got {sigma}")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_remote(&self) -> bool {
        matches!(self, BackendSpec::RemoteChat(_))
    }
}
