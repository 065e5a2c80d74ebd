use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::config::{ExperimentConfig, ProbeShift, SamplingProbeConfig};
use super::ExperimentError;
use crate::backends::{Backend, RunKey, Transcript, TranscriptEntry, TranscriptHeader};
use crate::engine::{Archive, Objective, PromptBuilder};
use crate::engine::ContinuousTask;
use crate::parsing::parse_solution;
use crate::problems::{ContinuousProblem, FunctionKind};
use crate::prompting::{ContinuousPrompt, HistoryOrder, ProblemKind, PromptPool};
use crate::seed::rng_from_seed;
use crate::seed_path;

/// Bins per axis of the uniformity test.
pub const CHI_SQUARE_BINS: usize = 4;

/// Root seed of the bundled probe archives; set `k` uses `archive / k`.
pub const PROBE_ARCHIVE_SEED: u64 = 0x5eed_0f_a7c1_4e;

const PROBE_ARCHIVE_SIZE: usize = 16;
const PROBE_SIGNIFICANCE: f64 = 0.01;
const GRID_STEP: f64 = 0.5;

/// Statistics and raw samples of one probe arm and repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub label: String,
    pub arm: String,
    pub shift: ProbeShift,
    pub order: HistoryOrder,
    pub repeat: usize,
    pub backend_seed: u64,
    pub function: String,
    pub bounds: [f64; 2],
    pub problem_shift: Vec<f64>,
    /// Archive as shown in the prompt, worst first.
    pub archive: Vec<([f64; 2], f64)>,
    pub archive_best: [f64; 2],
    pub requested: usize,
    pub valid: usize,
    pub excluded: usize,
    pub samples: Vec<[f64; 2]>,
    pub distances_to_best: Vec<f64>,
    pub chi_square: f64,
    pub chi_square_critical: f64,
    pub chi_square_p_value: f64,
    pub uniformity_rejected: bool,
    pub grid_artifact_score: f64,
    pub epsilon: f64,
    pub within_epsilon_fraction: f64,
    pub prompt_sha256: String,
    pub prompt: String,
}

#[derive(Debug, Clone)]
pub struct ProbeArtifacts {
    pub result: ProbeResult,
    pub transcript: Transcript,
}

/// Pearson statistic of `samples` against a uniform law on the square
/// `[lower, upper]²` split into `bins × bins` cells, with its critical value
/// at `alpha` and p-value (`bins² − 1` degrees of freedom).
pub fn chi_square_uniform(samples: &[[f64; 2]], lower: f64, upper: f64, bins: usize, alpha: f64) -> (f64, f64, f64) {
    let cells = bins * bins;
    let mut counts = vec![0usize; cells];
    let width = (upper - lower) / bins as f64;
    let cell = |v: f64| (((v - lower) / width).floor().max(0.0) as usize).min(bins - 1);
    for &[x, y] in samples {
        counts[cell(x) * bins + cell(y)] += 1;
    }
    let expected = samples.len() as f64 / cells as f64;
    let stat = if expected > 0.0 {
        counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum()
    } else {
        0.0
    };
    let law = ChiSquared::new((cells - 1) as f64).expect("positive degrees of freedom");
    (stat, law.inverse_cdf(1.0 - alpha), 1.0 - law.cdf(stat))
}

/// Fraction of samples whose coordinates are all integer multiples of 0.5.
pub fn grid_artifact_score(samples: &[[f64; 2]]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let on_grid = |v: f64| ((v / GRID_STEP) - (v / GRID_STEP).round()).abs() < 1e-9;
    let hits = samples.iter().filter(|s| s.iter().all(|&v| on_grid(v))).count();
    hits as f64 / samples.len() as f64
}

/// Sixteen 2-D points scattered around a seeded centre: centre uniform in
/// `[-2, 2]²`, offsets uniform in `[-1, 1]²`.
pub fn probe_archive(set: usize) -> Vec<[f64; 2]> {
    let mut rng = rng_from_seed(seed_path!(PROBE_ARCHIVE_SEED, "archive", set));
    let cx = rng.random_range(-2.0..=2.0);
    let cy = rng.random_range(-2.0..=2.0);
    (0..PROBE_ARCHIVE_SIZE)
        .map(|_| [cx + rng.random_range(-1.0..=1.0), cy + rng.random_range(-1.0..=1.0)])
        .collect()
}

struct Arm {
    shift: ProbeShift,
    order: HistoryOrder,
    task: ContinuousTask<f64>,
    archive: Archive<Vec<f64>, f64>,
    prompt: String,
}

fn order_name(order: HistoryOrder) -> &'static str {
    match order {
        HistoryOrder::Ascend => "ascend",
        HistoryOrder::Descend => "descend",
    }
}

fn build_arms(
    probe: &SamplingProbeConfig,
    config: &ExperimentConfig,
    pool: &PromptPool,
) -> Result<Vec<Arm>, ExperimentError> {
    let base = ContinuousProblem::new(FunctionKind::Sphere, 2)?;
    let [lo, hi] = probe.shift_range;
    let shifted = base.make_shifted(seed_path!(config.seed, "shift"), lo, hi)?;
    let points = probe_archive(probe.archive_set);
    let template = pool.template(ProblemKind::Continuous, config.prompt.instruction_id)?;
    let mut arms = Vec::new();
    for &shift in &probe.shifts {
        let problem = match shift {
            ProbeShift::NoShift => base.clone(),
            ProbeShift::Shifted => shifted.clone(),
        };
        let s = problem.shift().to_vec();
        let task = ContinuousTask::new(problem.clone());
        let entries = points.iter().map(|p| {
            let x = vec![p[0] + s[0], p[1] + s[1]];
            let f = task.evaluate(&x);
            (x, f)
        });
        let archive = Archive::from_entries(PROBE_ARCHIVE_SIZE, entries);
        for &order in &probe.orders {
            let prompts = ContinuousPrompt::new(template.clone(), &problem, config.prompt.format(), order)?;
            let prompt = prompts.build(&archive)?;
            arms.push(Arm {
                shift,
                order,
                task: task.clone(),
                archive: archive.clone(),
                prompt,
            });
        }
    }
    Ok(arms)
}

fn sample_arm(
    arm: &Arm,
    repeat: usize,
    probe: &SamplingProbeConfig,
    config: &ExperimentConfig,
    backend: &dyn Backend,
    hash: &str,
) -> Result<ProbeArtifacts, ExperimentError> {
    let name = format!("{}-{}", arm.shift.name(), order_name(arm.order));
    let label = format!("probe-{name}-r{repeat}");
    let backend_seed = seed_path!(config.seed, "backend", repeat);
    let problem = arm.task.problem();
    let context = arm.task.context();
    let history: Vec<_> = arm
        .archive
        .entries()
        .iter()
        .map(|e| (arm.task.payload(&e.solution), e.fitness))
        .collect();
    let ctx = crate::backends::QueryContext {
        problem: &context,
        history: &history,
    };
    let mut session = backend.open_session(&RunKey::new(label.clone(), backend_seed))?;
    let mut entries = Vec::with_capacity(probe.sample_count);
    let mut samples = Vec::with_capacity(probe.sample_count);
    for _ in 0..probe.sample_count {
        match session.generate(&arm.prompt, &ctx) {
            Ok(reply) => {
                if let Ok(x) = parse_solution::<f64>(&reply, 2, problem.lower(), problem.upper()) {
                    samples.push([x[0], x[1]]);
                }
                entries.push(TranscriptEntry::Reply { response: reply });
            }
            Err(e) => entries.push(TranscriptEntry::Error {
                kind: e.kind(),
                message: e.to_string(),
            }),
        }
    }
    drop(session);

    let best = arm.archive.best().expect("probe archive is non-empty");
    let best = [best.solution[0], best.solution[1]];
    let distances: Vec<f64> = samples
        .iter()
        .map(|s| (s[0] - best[0]).hypot(s[1] - best[1]))
        .collect();
    let within = distances.iter().filter(|&&d| d <= probe.epsilon).count();
    let (chi_square, critical, p_value) = chi_square_uniform(
        &samples,
        problem.lower(),
        problem.upper(),
        CHI_SQUARE_BINS,
        PROBE_SIGNIFICANCE,
    );
    let fraction = |k: usize| if samples.is_empty() { 0.0 } else { k as f64 / samples.len() as f64 };
    let result = ProbeResult {
        label: label.clone(),
        arm: name,
        shift: arm.shift,
        order: arm.order,
        repeat,
        backend_seed,
        function: problem.kind().name().to_owned(),
        bounds: [problem.lower(), problem.upper()],
        problem_shift: problem.shift().to_vec(),
        archive: arm
            .archive
            .entries()
            .iter()
            .map(|e| ([e.solution[0], e.solution[1]], e.fitness))
            .collect(),
        archive_best: best,
        requested: probe.sample_count,
        valid: samples.len(),
        excluded: probe.sample_count - samples.len(),
        grid_artifact_score: grid_artifact_score(&samples),
        within_epsilon_fraction: fraction(within),
        epsilon: probe.epsilon,
        chi_square,
        chi_square_critical: critical,
        chi_square_p_value: p_value,
        uniformity_rejected: chi_square > critical,
        distances_to_best: distances,
        samples,
        prompt_sha256: hex::encode(Sha256::digest(arm.prompt.as_bytes())),
        prompt: arm.prompt.clone(),
    };
    log::info!(
        "{label}: {} valid, chi2 = {:.3}, grid = {:.3}",
        result.valid,
        result.chi_square,
        result.grid_artifact_score
    );
    Ok(ProbeArtifacts {
        result,
        transcript: Transcript {
            header: TranscriptHeader {
                run: label,
                config_hash: hash.to_owned(),
            },
            entries,
        },
    })
}

/// Queries the backend `sample_count` times with one fixed prompt per
/// (shift, order) arm and repeat. Results are ordered by arm, then repeat.
pub fn run_sampling_probe(
    probe: &SamplingProbeConfig,
    config: &ExperimentConfig,
    pool: &PromptPool,
    backend: &dyn Backend,
    hash: &str,
) -> Result<Vec<ProbeArtifacts>, ExperimentError> {
    let arms = build_arms(probe, config, pool)?;
    let jobs: Vec<(&Arm, usize)> = arms
        .iter()
        .flat_map(|a| (0..config.repeats).map(move |r| (a, r)))
        .collect();
    jobs.par_iter()
        .map(|(arm, r)| sample_arm(arm, *r, probe, config, backend, hash))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{BackendSpec, ScriptedBackend, ScriptedPolicy};
    use crate::experiments::Protocol;
    use rand_distr::{Distribution, Uniform};

    fn config(policy: ScriptedPolicy, samples: usize) -> (ExperimentConfig, SamplingProbeConfig) {
        let probe = SamplingProbeConfig {
            sample_count: samples,
            ..SamplingProbeConfig::default()
        };
        let mut c = ExperimentConfig::new(Protocol::SamplingProbe(probe.clone()), BackendSpec::Scripted(policy));
        c.seed = 3;
        (c, probe)
    }

    #[test]
    fn chi_square_matches_hand_count() {
        // All samples in one cell of 4: (n - n/4)^2/(n/4) + 3 * n/4.
        let samples = vec![[0.1, 0.1]; 40];
        let (stat, _, p) = chi_square_uniform(&samples, 0.0, 1.0, 2, 0.01);
        assert!((stat - (30.0f64.powi(2) / 10.0 + 30.0)).abs() < 1e-12);
        assert!(p < 1e-6);
        let (_, crit, _) = chi_square_uniform(&samples, 0.0, 1.0, 4, 0.01);
        assert!((crit - 30.577914).abs() < 1e-5);
    }

    #[test]
    fn uniform_samples_are_not_rejected_mostly() {
        let mut passes = 0;
        for seed in 0..20 {
            let mut rng = rng_from_seed(seed);
            let u = Uniform::new(-5.12, 5.12).unwrap();
            let s: Vec<[f64; 2]> = (0..1000).map(|_| [u.sample(&mut rng), u.sample(&mut rng)]).collect();
            let (stat, crit, _) = chi_square_uniform(&s, -5.12, 5.12, 4, 0.01);
            passes += usize::from(stat < crit);
        }
        assert!(passes >= 18);
    }

    #[test]
    fn grid_score_counts_half_steps() {
        let s = [[0.5, 1.0], [0.25, 1.0], [-2.0, 3.5], [0.1, 0.2]];
        assert_eq!(grid_artifact_score(&s), 0.5);
    }

    #[test]
    fn point_mass_is_fully_within_epsilon() {
        let (c, probe) = config(ScriptedPolicy::EchoBest, 50);
        let pool = PromptPool::bundled();
        let b = ScriptedBackend::new(ScriptedPolicy::EchoBest);
        let out = run_sampling_probe(&probe, &c, &pool, &b, "h").unwrap();
        assert_eq!(out.len(), 4 * c.repeats);
        for a in &out {
            assert_eq!(a.result.valid, 50);
            assert_eq!(a.result.within_epsilon_fraction, 1.0);
            assert_eq!(a.transcript.entries.len(), 50);
        }
    }

    #[test]
    fn orders_differ_only_in_history_order() {
        let (c, probe) = config(ScriptedPolicy::Uniform, 1);
        let b = ScriptedBackend::new(ScriptedPolicy::Uniform);
        let out = run_sampling_probe(&probe, &c, &PromptPool::bundled(), &b, "h").unwrap();
        let asc = out.iter().find(|a| a.result.arm == "no_shift-ascend").unwrap();
        let desc = out.iter().find(|a| a.result.arm == "no_shift-descend").unwrap();
        assert_ne!(asc.result.prompt_sha256, desc.result.prompt_sha256);
        let mut a: Vec<&str> = asc.result.prompt.lines().collect();
        let mut d: Vec<&str> = desc.result.prompt.lines().collect();
        a.sort_unstable();
        d.sort_unstable();
        assert_eq!(a, d);
    }

    #[test]
    fn archives_are_reproducible_and_distinct() {
        assert_eq!(probe_archive(0), probe_archive(0));
        assert_ne!(probe_archive(0), probe_archive(1));
        assert_eq!(probe_archive(1).len(), 16);
    }
}
