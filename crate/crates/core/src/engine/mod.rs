//! The elitist prompt → generate → validate → update loop.
//!
//! 1. Draw `n` random solutions into the archive.
//! 2. Render one prompt from the archive and query the generator with it
//!    until `m` valid solutions are collected.
//! 3. Merge them into the archive, keeping the `n` best.
//! 4. Repeat 2–3 for `max_iterations` iterations.
//!
//! Each required solution gets at most `retry_cap` attempts. Exhausting the
//! cap ends the run as [`RunStatus::Failed`], keeping the best found so far.

mod archive;
mod metrics;
mod objectives;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use archive::{Archive, Entry};
pub use metrics::{collect_metrics, Aggregate, RunStats};
pub use objectives::{ContinuousTask, TspTask};

use crate::backends::{BackendErrorKind, Payload, ProblemContext, QueryContext, Session};
use crate::parsing::ParseErrorKind;
use crate::prompting::PromptError;
use crate::scalar::Scalar;
use crate::seed::{rng_from_seed, RunRng};

pub const DEFAULT_ARCHIVE_SIZE: usize = 16;
pub const DEFAULT_BATCH_SIZE: usize = 4;
pub const DEFAULT_ITERATIONS: usize = 100;
pub const DEFAULT_RETRY_CAP: usize = 100;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid loop config: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// A problem as seen by the loop: sampling, evaluation and reply parsing.
pub trait Objective {
    type Solution: Clone + PartialEq + std::fmt::Debug;
    type Fitness: Scalar;

    fn random_solution(&self, rng: &mut RunRng) -> Self::Solution;
    fn evaluate(&self, solution: &Self::Solution) -> Self::Fitness;
    fn parse(&self, response: &str) -> Result<Self::Solution, ParseErrorKind>;
    /// Problem facts handed to generators alongside the prompt.
    fn context(&self) -> ProblemContext;
    fn payload(&self, solution: &Self::Solution) -> Payload;
}

/// Renders the full prompt for the current archive.
pub trait PromptBuilder<S, F> {
    fn build(&self, archive: &Archive<S, F>) -> Result<String, PromptError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopConfig {
    /// Archive capacity.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Valid solutions collected per iteration.
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    /// Attempts allowed per required solution.
    #[serde(default = "default_retry_cap")]
    pub retry_cap: usize,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_n() -> usize {
    DEFAULT_ARCHIVE_SIZE
}
fn default_m() -> usize {
    DEFAULT_BATCH_SIZE
}
fn default_iterations() -> usize {
    DEFAULT_ITERATIONS
}
fn default_retry_cap() -> usize {
    DEFAULT_RETRY_CAP
}

impl Default for LoopConfig {
    fn default() -> Self {
        Self {
            n: DEFAULT_ARCHIVE_SIZE,
            m: DEFAULT_BATCH_SIZE,
            max_iterations: DEFAULT_ITERATIONS,
            retry_cap: DEFAULT_RETRY_CAP,
            rng_seed: 0,
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        for (name, v) in [("n", self.n), ("m", self.m), ("retry_cap", self.retry_cap)] {
            if v == 0 {
                return Err(EngineError::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Valid { fitness: f64 },
    ParseError { kind: ParseErrorKind },
    BackendError { kind: BackendErrorKind, message: String },
}

impl AttemptOutcome {
    pub fn is_valid(&self) -> bool {
        matches!(self, AttemptOutcome::Valid { .. })
    }
}

/// One generator query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub iteration: usize,
    /// Index of this attempt for the solution currently being requested.
    pub attempt_index: usize,
    pub prompt: Arc<str>,
    pub raw_response: String,
    pub outcome: AttemptOutcome,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome<S, F> {
    pub status: RunStatus,
    pub best_solution: S,
    pub best_fitness: F,
    /// Invalid attempts (parse or backend errors) across the run.
    pub total_retries: usize,
    /// Archive-best fitness after initialization and after each iteration.
    pub trace: Vec<F>,
    /// Iteration that exhausted the retry cap, if any.
    pub failed_iteration: Option<usize>,
    pub records: Vec<GenerationRecord>,
}

impl<S, F> RunOutcome<S, F> {
    pub fn total_queries(&self) -> usize {
        self.records.len()
    }

    /// Copy with wall-clock timings zeroed, for determinism comparisons.
    pub fn without_timing(&self) -> Self
    where
        S: Clone,
        F: Clone,
    {
        let mut out = self.clone();
        for r in &mut out.records {
            r.elapsed_ms = 0.0;
        }
        out
    }
}

/// Archive filled with `n` random draws from the seed stream. Depends only
/// on the objective and `config.rng_seed`.
pub fn initial_archive<O: Objective>(
    objective: &O,
    config: &LoopConfig,
) -> Archive<O::Solution, O::Fitness> {
    let mut rng = rng_from_seed(config.rng_seed);
    let draws: Vec<_> = (0..config.n)
        .map(|_| {
            let s = objective.random_solution(&mut rng);
            let f = objective.evaluate(&s);
            (s, f)
        })
        .collect();
    Archive::from_entries(config.n, draws)
}

pub fn run_loop<O, P>(
    objective: &O,
    session: &mut dyn Session,
    prompts: &P,
    config: &LoopConfig,
) -> Result<RunOutcome<O::Solution, O::Fitness>, EngineError>
where
    O: Objective,
    P: PromptBuilder<O::Solution, O::Fitness> + ?Sized,
{
    config.validate()?;
    let mut archive = initial_archive(objective, config);
    let problem = objective.context();
    let best_of = |a: &Archive<O::Solution, O::Fitness>| a.best().expect("archive is never empty").fitness;

    let mut trace = vec![best_of(&archive)];
    let mut records = Vec::new();
    let mut total_retries = 0;
    let mut failed_iteration = None;

    'iterations: for iteration in 0..config.max_iterations {
        let prompt: Arc<str> = prompts.build(&archive)?.into();
        let history: Vec<(Payload, f64)> = archive
            .entries()
            .iter()
            .map(|e| (objective.payload(&e.solution), e.fitness.as_f64()))
            .collect();
        let ctx = QueryContext {
            problem: &problem,
            history: &history,
        };

        let mut fresh = Vec::with_capacity(config.m);
        while fresh.len() < config.m {
            let mut attempt_index = 0;
            loop {
                if attempt_index == config.retry_cap {
                    log::info!(
                        "iteration {iteration}: {} failed attempts, giving up",
                        config.retry_cap
                    );
                    failed_iteration = Some(iteration);
                    break 'iterations;
                }
                let started = Instant::now();
                let reply = session.generate(&prompt, &ctx);
                let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;
                let (raw_response, outcome, valid) = match reply {
                    Ok(text) => match objective.parse(&text) {
                        Ok(solution) => {
                            let fitness = objective.evaluate(&solution);
                            let outcome = AttemptOutcome::Valid {
                                fitness: fitness.as_f64(),
                            };
                            (text, outcome, Some((solution, fitness)))
                        }
                        Err(kind) => (text, AttemptOutcome::ParseError { kind }, None),
                    },
                    Err(e) => {
                        let outcome = AttemptOutcome::BackendError {
                            kind: e.kind(),
                            message: e.to_string(),
                        };
                        (String::new(), outcome, None)
                    }
                };
                records.push(GenerationRecord {
                    iteration,
                    attempt_index,
                    prompt: Arc::clone(&prompt),
                    raw_response,
                    outcome,
                    elapsed_ms,
                });
                if let Some(candidate) = valid {
                    fresh.push(candidate);
                    break;
                }
                attempt_index += 1;
                total_retries += 1;
            }
        }
        archive.update(fresh);
        trace.push(best_of(&archive));
    }

    let best = archive.best().expect("archive is never empty");
    Ok(RunOutcome {
        status: if failed_iteration.is_some() {
            RunStatus::Failed
        } else {
            RunStatus::Completed
        },
        best_solution: best.solution.clone(),
        best_fitness: best.fitness,
        total_retries,
        trace,
        failed_iteration,
        records,
    })
}
