use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ProblemEntry, Protocol};
use super::probe::{run_sampling_probe, ProbeArtifacts};
use super::ExperimentError;
use crate::backends::{
    record_transcript, Backend, BackendErrorKind, Payload, RunKey, Transcript, TRANSCRIPT_SUFFIX,
};
use crate::engine::{
    run_loop, AttemptOutcome, ContinuousTask, GenerationRecord, LoopConfig, Objective, PromptBuilder,
    RunOutcome, RunStatus, TspTask,
};
use crate::oracle::{held_karp_tsp, optimality_gap, OracleResult, HELD_KARP_MAX_CITIES};
use crate::problems::ContinuousProblem;
use crate::prompting::{
    ContinuousPrompt, HistoryOrder, NumberFormat, ProblemKind, PromptPool, TspPrompt,
};
use crate::seed_path;
use crate::tsp::{make_view, InstanceFile, PromptView};
use crate::{Instance, Problem};

/// What a run's headline number measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// Percent excess of the best tour over the exact optimum.
    GapPercent,
    TourLength,
    BestFitness,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::GapPercent => "gap_percent",
            MetricKind::TourLength => "tour_length",
            MetricKind::BestFitness => "best_fitness",
        }
    }
}

/// Per-run summary, written to `runs/<label>.summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub label: String,
    pub protocol: String,
    pub point: usize,
    pub arm_index: usize,
    pub problem: String,
    pub arm: String,
    pub sweep_value: Option<f64>,
    pub repeat: usize,
    pub run_seed: u64,
    pub backend_seed: u64,
    pub status: RunStatus,
    pub failed_iteration: Option<usize>,
    pub metric: MetricKind,
    pub metric_value: f64,
    pub best_fitness: f64,
    /// Optimum the gap is measured against, when known.
    pub reference: Option<f64>,
    pub best_solution: Payload,
    pub total_retries: usize,
    pub total_queries: usize,
    pub backend_errors: usize,
    pub context_length_errors: usize,
    pub prompt_chars_max: usize,
    /// Archive-best fitness after initialization and each iteration.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub result: RunResult,
    pub records: Vec<GenerationRecord>,
    pub transcript: Option<Transcript>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub points: Vec<PointInfo>,
    pub runs: Vec<RunArtifacts>,
    pub probes: Vec<ProbeArtifacts>,
}

/// Resolved description of one (point, arm), written to `resolved.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointInfo {
    pub point: usize,
    pub arm_index: usize,
    pub problem: String,
    pub arm: String,
    pub sweep_value: Option<f64>,
    pub decimal_digits: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub displayed: Option<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub optimal_tour: Option<Vec<usize>>,
}

enum Task {
    Continuous {
        problem: Problem,
        order: HistoryOrder,
    },
    Tsp {
        instance: Arc<Instance>,
        view: PromptView<f64>,
        optimum: Option<Arc<OracleResult<f64>>>,
    },
}

struct Point {
    index: usize,
    arm_index: usize,
    problem_id: String,
    arm: String,
    sweep_value: Option<f64>,
    fmt: NumberFormat,
    metric: MetricKind,
    task: Task,
}

impl Point {
    fn info(&self) -> PointInfo {
        let mut info = PointInfo {
            point: self.index,
            arm_index: self.arm_index,
            problem: self.problem_id.clone(),
            arm: self.arm.clone(),
            sweep_value: self.sweep_value,
            decimal_digits: self.fmt.decimal_digits,
            function: None,
            bounds: None,
            shift: None,
            instance: None,
            displayed: None,
            optimal_length: None,
            optimal_tour: None,
        };
        match &self.task {
            Task::Continuous { problem, .. } => {
                info.function = Some(problem.kind().name().to_owned());
                info.bounds = Some([problem.lower(), problem.upper()]);
                info.shift = Some(problem.shift().to_vec());
            }
            Task::Tsp {
                instance,
                view,
                optimum,
            } => {
                info.instance = Some(InstanceFile::from(instance.as_ref()));
                info.displayed = view
                    .displayed
                    .as_ref()
                    .map(|pts| pts.iter().map(|p| [p.x, p.y]).collect());
                info.optimal_length = optimum
                    .as_ref()
                    .map(|o| o.optimal_length)
                    .or(instance.reference_length());
                info.optimal_tour = optimum.as_ref().map(|o| o.optimal_tour.order().to_vec());
            }
        }
        info
    }
}

fn shift_seed(master: u64) -> u64 {
    seed_path!(master, "shift")
}

fn instance_seed(master: u64, cities: usize) -> u64 {
    seed_path!(master, "instance", cities)
}

/// Exact optimum when the instance is small enough.
fn exact_optimum(instance: &Instance) -> Result<Option<Arc<OracleResult<f64>>>, ExperimentError> {
    if instance.len() <= HELD_KARP_MAX_CITIES {
        Ok(Some(Arc::new(held_karp_tsp(instance)?)))
    } else {
        Ok(None)
    }
}

fn tsp_metric(instance: &Instance, optimum: &Option<Arc<OracleResult<f64>>>) -> MetricKind {
    if optimum.is_some() || instance.reference_length().is_some() {
        MetricKind::GapPercent
    } else {
        MetricKind::TourLength
    }
}

fn build_points(config: &ExperimentConfig) -> Result<Vec<Point>, ExperimentError> {
    let master = config.seed;
    let fmt = config.prompt.format();
    let continuous = |index: usize, problem: Problem, sweep_value: Option<f64>, fmt: NumberFormat| Point {
        index,
        arm_index: 0,
        problem_id: problem.id(),
        arm: "default".into(),
        sweep_value,
        fmt,
        metric: MetricKind::BestFitness,
        task: Task::Continuous {
            problem,
            order: HistoryOrder::Descend,
        },
    };
    let mut points = Vec::new();
    match &config.protocol {
        Protocol::Baseline { problems } => {
            for (index, entry) in problems.iter().enumerate() {
                match entry {
                    ProblemEntry::Continuous(spec) => {
                        points.push(continuous(index, spec.resolve(shift_seed(master))?, None, fmt));
                    }
                    ProblemEntry::Tsp(spec) => {
                        let instance = spec.load(instance_seed(master, spec.cities.unwrap_or(0)))?;
                        let optimum = exact_optimum(&instance)?;
                        points.push(Point {
                            index,
                            arm_index: 0,
                            problem_id: spec.id(),
                            arm: "default".into(),
                            sweep_value: None,
                            fmt,
                            metric: tsp_metric(&instance, &optimum),
                            task: Task::Tsp {
                                view: PromptView::truthful(&instance),
                                instance: Arc::new(instance),
                                optimum,
                            },
                        });
                    }
                }
            }
        }
        Protocol::PrecisionSweep {
            function,
            dimension,
            digits,
            shift: [lo, hi],
        } => {
            let problem = ContinuousProblem::new(*function, *dimension)?.make_shifted(shift_seed(master), *lo, *hi)?;
            for (index, &d) in digits.iter().enumerate() {
                points.push(continuous(index, problem.clone(), Some(d as f64), NumberFormat::new(d)));
            }
        }
        Protocol::DimensionScaling {
            function,
            dimensions,
            shift: [lo, hi],
        } => {
            for (index, &n) in dimensions.iter().enumerate() {
                let problem = ContinuousProblem::new(*function, n)?.make_shifted(shift_seed(master), *lo, *hi)?;
                points.push(continuous(index, problem, Some(n as f64), fmt));
            }
        }
        Protocol::ShiftSweep {
            functions,
            dimension,
            magnitudes,
        } => {
            let mut index = 0;
            for &f in functions {
                for &m in magnitudes {
                    let problem = ContinuousProblem::new(f, *dimension)?.make_shifted(shift_seed(master), m, m)?;
                    points.push(continuous(index, problem, Some(m), fmt));
                    index += 1;
                }
            }
        }
        Protocol::SamplingProbe(_) => {}
        Protocol::CoordHeuristics { cities, views } => {
            let instance = Arc::new(Instance::random(*cities, instance_seed(master, *cities))?);
            let optimum = exact_optimum(&instance)?;
            for (arm_index, &mode) in views.iter().enumerate() {
                points.push(Point {
                    index: 0,
                    arm_index,
                    problem_id: format!("tsp-{cities}"),
                    arm: mode.name().into(),
                    sweep_value: None,
                    fmt,
                    metric: MetricKind::TourLength,
                    task: Task::Tsp {
                        view: make_view(&instance, mode, seed_path!(master, "view", mode.name()))?,
                        instance: Arc::clone(&instance),
                        optimum: optimum.clone(),
                    },
                });
            }
        }
        Protocol::CityNameHeuristics { instance, settings } => {
            let id = instance.id();
            let inst = Arc::new(instance.load(instance_seed(master, instance.cities.unwrap_or(0)))?);
            let optimum = exact_optimum(&inst)?;
            for (arm_index, &mode) in settings.iter().enumerate() {
                points.push(Point {
                    index: 0,
                    arm_index,
                    problem_id: id.clone(),
                    arm: mode.name().into(),
                    sweep_value: None,
                    fmt,
                    metric: tsp_metric(&inst, &optimum),
                    task: Task::Tsp {
                        view: make_view(&inst, mode, seed_path!(master, "view", mode.name()))?,
                        instance: Arc::clone(&inst),
                        optimum: optimum.clone(),
                    },
                });
            }
        }
    }
    Ok(points)
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn run_label(point: &Point, repeat: usize) -> String {
    sanitize(&format!(
        "p{:02}-a{:02}-{}-{}-r{}",
        point.index, point.arm_index, point.problem_id, point.arm, repeat
    ))
}

struct Finished {
    outcome_status: RunStatus,
    failed_iteration: Option<usize>,
    best_fitness: f64,
    best_solution: Payload,
    total_retries: usize,
    trace: Vec<f64>,
    records: Vec<GenerationRecord>,
}

fn drive<O, P>(
    objective: &O,
    prompts: &P,
    session: &mut dyn crate::backends::Session,
    config: &LoopConfig,
) -> Result<Finished, ExperimentError>
where
    O: Objective<Fitness = f64>,
    P: PromptBuilder<O::Solution, f64>,
{
    let out: RunOutcome<O::Solution, f64> = run_loop(objective, session, prompts, config)?;
    Ok(Finished {
        outcome_status: out.status,
        failed_iteration: out.failed_iteration,
        best_fitness: out.best_fitness,
        best_solution: objective.payload(&out.best_solution),
        total_retries: out.total_retries,
        trace: out.trace,
        records: out.records,
    })
}

fn execute(
    point: &Point,
    repeat: usize,
    config: &ExperimentConfig,
    pool: &PromptPool,
    backend: &dyn Backend,
    hash: &str,
) -> Result<RunArtifacts, ExperimentError> {
    let master = config.seed;
    let run_seed = seed_path!(master, "run", repeat);
    let backend_seed = seed_path!(master, "backend", repeat);
    let label = run_label(point, repeat);
    let loop_config = LoopConfig {
        rng_seed: run_seed,
        ..config.loop_config.clone()
    };
    let id = config.prompt.instruction_id;
    let mut session = backend.open_session(&RunKey::new(label.clone(), backend_seed))?;
    let (finished, reference) = match &point.task {
        Task::Continuous { problem, order } => {
            let prompts = ContinuousPrompt::new(pool.template(ProblemKind::Continuous, id)?, problem, point.fmt, *order)?;
            let task = ContinuousTask::new(problem.clone()).with_display_digits(point.fmt.decimal_digits);
            (drive(&task, &prompts, session.as_mut(), &loop_config)?, None)
        }
        Task::Tsp {
            instance,
            view,
            optimum,
        } => {
            let prompts = TspPrompt::new(pool.template(ProblemKind::Tsp, id)?, view, point.fmt)?;
            let task = TspTask::new(instance.as_ref().clone(), view)
                .with_optimal_tour(optimum.as_ref().map(|o| o.optimal_tour.clone()));
            let reference = optimum
                .as_ref()
                .map(|o| o.optimal_length)
                .or(instance.reference_length());
            (drive(&task, &prompts, session.as_mut(), &loop_config)?, reference)
        }
    };
    drop(session);

    let metric_value = match (point.metric, reference) {
        (MetricKind::GapPercent, Some(opt)) => optimality_gap(finished.best_fitness, opt)?,
        _ => finished.best_fitness,
    };
    let count_errors = |pred: &dyn Fn(BackendErrorKind) -> bool| {
        finished
            .records
            .iter()
            .filter(|r| matches!(r.outcome, AttemptOutcome::BackendError { kind, .. } if pred(kind)))
            .count()
    };
    let result = RunResult {
        label: label.clone(),
        protocol: config.protocol.name().to_owned(),
        point: point.index,
        arm_index: point.arm_index,
        problem: point.problem_id.clone(),
        arm: point.arm.clone(),
        sweep_value: point.sweep_value,
        repeat,
        run_seed,
        backend_seed,
        status: finished.outcome_status,
        failed_iteration: finished.failed_iteration,
        metric: point.metric,
        metric_value,
        best_fitness: finished.best_fitness,
        reference,
        best_solution: finished.best_solution,
        total_retries: finished.total_retries,
        total_queries: finished.records.len(),
        backend_errors: count_errors(&|_| true),
        context_length_errors: count_errors(&|k| k == BackendErrorKind::ContextLength),
        prompt_chars_max: finished
            .records
            .iter()
            .map(|r| r.prompt.chars().count())
            .max()
            .unwrap_or(0),
        trace: finished.trace,
    };
    log::info!(
        "{label}: {:?}, {} = {}",
        result.status,
        result.metric.name(),
        result.metric_value
    );
    let outcome_for_transcript = RunOutcome {
        status: result.status,
        best_solution: (),
        best_fitness: result.best_fitness,
        total_retries: result.total_retries,
        trace: Vec::new(),
        failed_iteration: result.failed_iteration,
        records: finished.records,
    };
    let transcript = record_transcript(&outcome_for_transcript, &label, hash).ok();
    Ok(RunArtifacts {
        result,
        records: outcome_for_transcript.records,
        transcript,
    })
}

/// Runs every (point, arm, repeat) of the protocol. Results come back in
/// (point, arm, repeat) order regardless of `parallel`.
pub fn run_experiment(
    config: &ExperimentConfig,
    backend: &dyn Backend,
    parallel: usize,
) -> Result<ExperimentOutput, ExperimentError> {
    config.validate()?;
    let hash = config.hash_without_backend();
    let pool = config.prompt.pool()?;
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| ExperimentError::Io(format!("thread pool: {e}")))?;

    if let Protocol::SamplingProbe(probe) = &config.protocol {
        let probes = threads.install(|| run_sampling_probe(probe, config, &pool, backend, &hash))?;
        return Ok(ExperimentOutput {
            config: config.clone(),
            points: Vec::new(),
            runs: Vec::new(),
            probes,
        });
    }

    let points = build_points(config)?;
    let jobs: Vec<(&Point, usize)> = points
        .iter()
        .flat_map(|p| (0..config.repeats).map(move |r| (p, r)))
        .collect();
    let runs = threads.install(|| {
        jobs.par_iter()
            .map(|(p, r)| execute(p, *r, config, &pool, backend, &hash))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut runs = runs;
    runs.sort_by_key(|a| (a.result.point, a.result.arm_index, a.result.repeat));
    Ok(ExperimentOutput {
        config: config.clone(),
        points: points.iter().map(Point::info).collect(),
        runs,
        probes: Vec::new(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| ExperimentError::io(path.display(), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| ExperimentError::io(path.display(), e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), ExperimentError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).map_err(|e| ExperimentError::io(path.display(), e))?);
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| ExperimentError::io(path.display(), e))
}

/// Writes `config.json`, `resolved.json`, per-run logs, summaries and
/// transcripts, then regenerates `summary.csv` and `plotdata/`.
pub fn write_output(dir: &Path, output: &ExperimentOutput) -> Result<(), ExperimentError> {
    let runs_dir = dir.join("runs");
    fs::create_dir_all(&runs_dir).map_err(|e| ExperimentError::io(runs_dir.display(), e))?;
    write_json(&dir.join("config.json"), &output.config)?;
    write_json(&dir.join("resolved.json"), &output.points)?;
    for run in &output.runs {
        let label = &run.result.label;
        write_jsonl(&runs_dir.join(format!("{label}.jsonl")), &run.records)?;
        write_json(&runs_dir.join(format!("{label}.summary.json")), &run.result)?;
        if let Some(t) = &run.transcript {
            t.write(&runs_dir.join(format!("{label}{TRANSCRIPT_SUFFIX}")))?;
        }
    }
    if !output.probes.is_empty() {
        let probe_dir = dir.join("probes");
        fs::create_dir_all(&probe_dir).map_err(|e| ExperimentError::io(probe_dir.display(), e))?;
        for p in &output.probes {
            let label = &p.result.label;
            write_json(&probe_dir.join(format!("{label}.json")), &p.result)?;
            p.transcript
                .write(&runs_dir.join(format!("{label}{TRANSCRIPT_SUFFIX}")))?;
        }
    }
    crate::reporting::regenerate(dir)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendSpec, HillClimbBackend, ScriptedBackend, ScriptedPolicy};
    use crate::problems::FunctionKind;
    use crate::tsp::ViewMode;

    fn quick(protocol: Protocol, backend: BackendSpec, iterations: usize) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(protocol, backend);
        c.loop_config.max_iterations = iterations;
        c.seed = 17;
        c
    }

    #[test]
    fn optimal_tour_backend_has_zero_gap() {
        let c = quick(
            Protocol::Baseline {
                problems: vec![ProblemEntry::Tsp(crate::experiments::TspSpec::random(10))],
            },
            BackendSpec::Scripted(ScriptedPolicy::EchoOptimum { digits: None }),
            3,
        );
        let backend = c.backend.build().unwrap();
        let out = run_experiment(&c, backend.as_ref(), 1).unwrap();
        assert_eq!(out.runs.len(), 5);
        for r in &out.runs {
            assert_eq!(r.result.status, RunStatus::Completed);
            assert_eq!(r.result.metric, MetricKind::GapPercent);
            assert_eq!(r.result.metric_value, 0.0);
        }
    }

    #[test]
    fn always_invalid_fails_every_repeat() {
        let mut c = quick(
            Protocol::Baseline {
                problems: vec![ProblemEntry::Tsp(crate::experiments::TspSpec::random(10))],
            },
            BackendSpec::Scripted(ScriptedPolicy::AlwaysInvalid),
            3,
        );
        c.loop_config.retry_cap = 5;
        let backend = c.backend.build().unwrap();
        let out = run_experiment(&c, backend.as_ref(), 2).unwrap();
        assert!(out.runs.iter().all(|r| r.result.status == RunStatus::Failed));
        assert!(out.runs.iter().all(|r| r.records.len() == 5));
    }

    #[test]
    fn arms_share_instances_and_initial_archives() {
        let c = quick(
            Protocol::CoordHeuristics {
                cities: 10,
                views: vec![ViewMode::Masked, ViewMode::Shifted, ViewMode::True],
            },
            BackendSpec::Scripted(ScriptedPolicy::NearestNeighbor),
            5,
        );
        let backend = c.backend.build().unwrap();
        let out = run_experiment(&c, backend.as_ref(), 3).unwrap();
        assert_eq!(out.runs.len(), 15);
        for r in 0..5 {
            let arms: Vec<&RunResult> = out.runs.iter().map(|a| &a.result).filter(|x| x.repeat == r).collect();
            assert_eq!(arms.len(), 3);
            assert!(arms.iter().all(|a| a.trace[0] == arms[0].trace[0]));
            // true and shifted views yield the same tour
            assert_eq!(arms[1].best_fitness, arms[2].best_fitness);
        }
        assert_eq!(out.points[0].instance, out.points[2].instance);
        assert_eq!(
            out.points[2].displayed.as_ref().unwrap(),
            &out.points[2]
                .instance
                .as_ref()
                .unwrap()
                .coordinates
                .iter()
                .map(|&p| <[f64; 2]>::from(p))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn parallel_matches_serial() {
        let c = quick(
            Protocol::ShiftSweep {
                functions: vec![FunctionKind::Sphere],
                dimension: 2,
                magnitudes: vec![0.0, 1.0],
            },
            BackendSpec::HillClimb { sigma: 0.1 },
            10,
        );
        let backend = HillClimbBackend::new(0.1).unwrap();
        let a = run_experiment(&c, &backend, 1).unwrap();
        let b = run_experiment(&c, &backend, 4).unwrap();
        let strip = |o: &ExperimentOutput| o.runs.iter().map(|r| r.result.clone()).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));
    }

    #[test]
    fn displayed_optimum_hits_the_rounding_floor() {
        let mut c = quick(
            Protocol::PrecisionSweep {
                function: FunctionKind::Sphere,
                dimension: 2,
                digits: vec![1, 2, 3, 4, 5, 6],
                shift: [-0.1, 0.1],
            },
            BackendSpec::Scripted(ScriptedPolicy::EchoOptimumDisplayed),
            2,
        );
        c.repeats = 1;
        let backend = c.backend.build().unwrap();
        let out = run_experiment(&c, backend.as_ref(), 1).unwrap();
        for (p, r) in out.points.iter().zip(&out.runs) {
            let d = p.decimal_digits as i32;
            let floor: f64 = p
                .shift
                .as_ref()
                .unwrap()
                .iter()
                .map(|&s| {
                    let q = (s * 10f64.powi(d)).round() / 10f64.powi(d);
                    (q - s).powi(2)
                })
                .sum();
            assert!((r.result.best_fitness - floor).abs() <= 1e-12, "d={d}");
        }
    }

    #[test]
    fn precision_points_share_the_shift() {
        let c = quick(
            Protocol::PrecisionSweep {
                function: FunctionKind::Sphere,
                dimension: 2,
                digits: vec![1, 3, 5],
                shift: [-0.1, 0.1],
            },
            BackendSpec::Scripted(ScriptedPolicy::EchoBest),
            1,
        );
        let out = run_experiment(&c, &ScriptedBackend::new(ScriptedPolicy::EchoBest), 1).unwrap();
        let shifts: Vec<_> = out.points.iter().map(|p| p.shift.clone().unwrap()).collect();
        assert!(shifts.iter().all(|s| s == &shifts[0]));
        assert!(shifts[0].iter().all(|v| (-0.1..=0.1).contains(v)));
        assert_ne!(shifts[0], vec![0.0, 0.0]);
    }
}
