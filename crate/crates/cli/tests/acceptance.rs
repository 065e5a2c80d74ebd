//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use optlab::backends::{Backend, RandomSearchBackend, RunKey, ScriptedBackend, ScriptedPolicy};
use optlab::engine::{
    run_loop, Archive, ContinuousTask, LoopConfig, PromptBuilder, RunStatus, DEFAULT_RETRY_CAP,
};
use optlab::experiments::{run_experiment, ExperimentConfig, Protocol, SamplingProbeConfig};
use optlab::oracle::{brute_force_tsp, held_karp_tsp};
use optlab::parsing::{parse_solution, parse_trace, ParseErrorKind};
use optlab::problems::{ContinuousProblem, FunctionKind};
use optlab::prompting::{
    render_entry, ContinuousPrompt, HistoryOrder, NumberFormat, ProblemKind, PromptPool, TspPrompt,
};
use optlab::reporting::SUMMARY_FILE;
use optlab::seed::rng_from_seed;
use optlab::tsp::{
    grid15_fixture, haversine, make_view, us_cities, Point, PromptView, Tour, ViewMode, EARTH_RADIUS_KM,
};
use optlab::{Instance, Problem};
use rand::Rng;

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn optlab(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_optlab"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "optlab {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out)
}

fn oracle_equivalence() -> Check {
    let start = Instant::now();
    let mut count = 0;
    for n in 5..=11 {
        for k in 0..50u64 {
            let inst = Instance::random(n, 1000 * n as u64 + k).map_err(|e| e.to_string())?;
            let hk = held_karp_tsp(&inst).map_err(|e| e.to_string())?;
            let bf = brute_force_tsp(&inst).map_err(|e| e.to_string())?;
            ensure!(
                hk.optimal_length == bf.optimal_length,
                "N={n} instance {k}: Held-Karp {} vs brute force {}",
                hk.optimal_length,
                bf.optimal_length
            );
            count += 1;
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(300), "took {took:?}");
    Ok(format!("{count} instances agree exactly in {took:.1?}"))
}

fn held_karp_scale() -> Check {
    let inst = Instance::random(20, 20).map_err(|e| e.to_string())?;
    let mut results = Vec::new();
    let start = Instant::now();
    for _ in 0..3 {
        let t = Instant::now();
        let r = held_karp_tsp(&inst).map_err(|e| e.to_string())?;
        ensure!(t.elapsed() < Duration::from_secs(60), "one solve took {:?}", t.elapsed());
        results.push(r);
    }
    ensure!(
        results.iter().all(|r| r == &results[0]),
        "results differ between runs"
    );
    Ok(format!(
        "20 cities, length {}, {:.1?} per solve",
        results[0].optimal_length,
        start.elapsed() / 3
    ))
}

fn function_correctness() -> Check {
    for kind in FunctionKind::ALL {
        let p = Problem::new(kind, 2).map_err(|e| e.to_string())?;
        let v = p.evaluate(&p.optimum_point()).map_err(|e| e.to_string())?;
        ensure!(v.abs() <= 1e-9, "{kind} at its optimum: {v}");
    }
    let mut rng = rng_from_seed(3);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let kind = FunctionKind::ALL[i % 5];
        let dim = 1 + i % 4;
        let base = Problem::new(kind, dim)
            .and_then(|p| p.with_bounds(-20.0, 20.0))
            .map_err(|e| e.to_string())?;
        let s: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect();
        let shifted = base.clone().with_shift(s.clone()).map_err(|e| e.to_string())?;
        let moved: Vec<f64> = x.iter().zip(&s).map(|(a, b)| a - b).collect();
        let a = shifted.evaluate(&x).map_err(|e| e.to_string())?;
        let b = kind.eval(&moved);
        let rel = if a == b { 0.0 } else { (a - b).abs() / a.abs().max(b.abs()) };
        worst = worst.max(rel);
    }
    ensure!(worst <= 1e-12, "shift identity off by {worst:e} relative");
    Ok(format!("optima exact; 1000 shift pairs, worst relative error {worst:e}"))
}

fn golden(name: &str) -> Result<String, String> {
    let path = workspace().join("crates/core/tests/golden").join(name);
    fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
}

fn tsp_prompt(view: &PromptView<f64>, tours: &[Vec<usize>], inst: &Instance) -> Result<String, String> {
    let template = PromptPool::bundled()
        .template(ProblemKind::Tsp, 0)
        .map_err(|e| e.to_string())?;
    let prompts = TspPrompt::new(template, view, NumberFormat::new(5)).map_err(|e| e.to_string())?;
    let entries = tours
        .iter()
        .map(|t| {
            let tour = Tour::new(t.clone(), t.len()).map_err(|e| e.to_string())?;
            let len = inst.tour_length(&tour).map_err(|e| e.to_string())?;
            Ok((tour, len))
        })
        .collect::<Result<Vec<_>, String>>()?;
    prompts.build(&Archive::from_entries(16, entries)).map_err(|e| e.to_string())
}

fn prompt_goldens() -> Check {
    let e = |x: optlab::prompting::PromptError| x.to_string();
    let mut rendered = Vec::new();

    let top: Vec<String> = [18.70646, 13.76381, 11.34156]
        .iter()
        .map(|&v| render_entry(&vec![-2.6711006, -3.21306], v, NumberFormat::new(5)))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    rendered.push(("top_solutions.txt", top.join("\n")));

    let precision: Vec<String> = [1, 3, 5]
        .iter()
        .map(|&d| render_entry(&vec![-2.6711006, -3.2130612], 18.706459, NumberFormat::new(d)))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    rendered.push(("precision_settings.txt", precision.join("\n")));

    let problem = ContinuousProblem::<f64>::new(FunctionKind::Rastrigin, 2).map_err(|x| x.to_string())?;
    let template = PromptPool::bundled().template(ProblemKind::Continuous, 0).map_err(e)?;
    let prompts = ContinuousPrompt::new(template, &problem, NumberFormat::new(5), HistoryOrder::Descend).map_err(e)?;
    let archive = Archive::from_entries(16, [(vec![-2.6711006, -3.21306], 18.70646), (vec![1.0, -0.5], 21.25)]);
    rendered.push(("continuous_prompt.txt", prompts.build(&archive).map_err(e)?));

    let grid = grid15_fixture();
    rendered.push((
        "tsp_prompt.txt",
        tsp_prompt(
            &PromptView::truthful(&grid),
            &[(0..15).collect(), vec![0, 9, 3, 5, 13, 11, 7, 14, 4, 1, 12, 6, 8, 2, 10]],
            &grid,
        )?,
    ));
    let cities = us_cities();
    let names = make_view(&cities, ViewMode::NamesOnly, 0).map_err(|x| x.to_string())?;
    rendered.push(("tsp_names_prompt.txt", tsp_prompt(&names, &[(0..15).collect()], &cities)?));

    for (name, text) in &rendered {
        ensure!(*text == golden(name)?, "{name} differs from its golden file");
    }
    let all = rendered.iter().map(|(_, t)| t.as_str()).collect::<Vec<_>>().join("\n");
    for needle in ["value: 18.70646", "(0): (74, 39)", "-2.7,", "-2.671,", "-2.67110,"] {
        ensure!(all.contains(needle), "missing {needle:?}");
    }
    Ok(format!("{} golden prompts match byte-for-byte", rendered.len()))
}

fn parser_taxonomy() -> Check {
    let duplicate = "Sure! Here's a new solution with a length lower than any of the above solutions:\n\n<trace>1,7,9,2,1,8,4,6,3,5</trace>";
    let verbose = "The AI assistant has provided a new trace that starts with <trace> and ends with </trace>, traversing all points exactly once.\nThe trace is as follows:\n<trace>0,1,5,9,3,4,2,7,6,8</trace>\nThe AI assistant has generated a new trace that starts with <trace> and ends with </trace>, traversing all points exactly once.";
    ensure!(
        parse_trace(duplicate, 10) == Err(ParseErrorKind::DuplicateElement),
        "duplicate reply classified as {:?}",
        parse_trace(duplicate, 10)
    );
    ensure!(
        parse_trace(verbose, 10) == Err(ParseErrorKind::MultipleTags),
        "verbose reply classified as {:?}",
        parse_trace(verbose, 10)
    );
    let mut rng = rng_from_seed(77);
    let pieces = ["<trace>", "</trace>", "<solution>", "</solution>", ",", "-", "1e999", "nan", " ", "<", "/", "7"];
    let bases = ["<trace>0,1,2,3,4,5,6,7,8,9</trace>", "<solution>0.5,-1.25</solution>", duplicate, verbose];
    let mut classified = 0;
    for i in 0..10_000 {
        let mut s: Vec<char> = bases[i % 4].chars().collect();
        for _ in 0..rng.random_range(1..6) {
            let at = rng.random_range(0..=s.len());
            if rng.random_bool(0.4) && at < s.len() {
                s.remove(at);
            } else {
                let p = pieces[rng.random_range(0..pieces.len())];
                for (k, c) in p.chars().enumerate() {
                    s.insert(at + k, c);
                }
            }
        }
        let reply: String = s.into_iter().collect();
        let outcome = panic::catch_unwind(|| (parse_trace(&reply, 10).err(), parse_solution::<f64>(&reply, 2, -5.0, 5.0).err()))
            .map_err(|_| format!("parser panicked on {reply:?}"))?;
        for kind in [outcome.0, outcome.1].into_iter().flatten() {
            ensure!(ParseErrorKind::ALL.contains(&kind), "unclassified {kind:?}");
        }
        classified += 1;
    }
    Ok(format!("appendix replies classified; {classified} fuzz cases without a crash"))
}

fn sphere_task() -> Result<ContinuousTask<f64>, String> {
    Ok(ContinuousTask::new(Problem::new(FunctionKind::Sphere, 2).map_err(|e| e.to_string())?))
}

fn sphere_prompts(task: &ContinuousTask<f64>) -> Result<ContinuousPrompt, String> {
    let template = PromptPool::bundled()
        .template(ProblemKind::Continuous, 0)
        .map_err(|e| e.to_string())?;
    ContinuousPrompt::new(template, task.problem(), NumberFormat::default(), HistoryOrder::Descend).map_err(|e| e.to_string())
}

fn loop_config(m: usize, iterations: usize, seed: u64) -> LoopConfig {
    LoopConfig {
        n: 16,
        m,
        max_iterations: iterations,
        retry_cap: DEFAULT_RETRY_CAP,
        rng_seed: seed,
    }
}

fn engine_monotonicity() -> Check {
    let task = sphere_task()?;
    let prompts = sphere_prompts(&task)?;
    let mut violations = 0;
    for seed in 0..100 {
        let mut session = RandomSearchBackend
            .open_session(&RunKey::new("mono", seed + 10_000))
            .map_err(|e| e.to_string())?;
        let out = run_loop(&task, session.as_mut(), &prompts, &loop_config(4, 100, seed)).map_err(|e| e.to_string())?;
        ensure!(out.trace.len() == 101, "trace length {}", out.trace.len());
        violations += out.trace.windows(2).filter(|w| w[1] > w[0]).count();
    }
    ensure!(violations == 0, "{violations} violations");
    Ok("100 runs x 100 iterations, zero violations".into())
}

fn retry_accounting() -> Check {
    let task = sphere_task()?;
    let prompts = sphere_prompts(&task)?;
    let two_bad = ScriptedBackend::new(ScriptedPolicy::InvalidThenValid {
        invalid: 2,
        then: Box::new(ScriptedPolicy::EchoBest),
    });
    let mut s = two_bad.open_session(&RunKey::new("r", 1)).map_err(|e| e.to_string())?;
    let out = run_loop(&task, s.as_mut(), &prompts, &loop_config(1, 10, 5)).map_err(|e| e.to_string())?;
    ensure!(out.status == RunStatus::Completed, "status {:?}", out.status);
    ensure!(out.total_retries == 20, "total_retries {}", out.total_retries);

    let never = ScriptedBackend::new(ScriptedPolicy::AlwaysInvalid);
    let mut s = never.open_session(&RunKey::new("r", 2)).map_err(|e| e.to_string())?;
    let mut cfg = loop_config(4, 10, 5);
    cfg.retry_cap = 5;
    let out = run_loop(&task, s.as_mut(), &prompts, &cfg).map_err(|e| e.to_string())?;
    ensure!(out.status == RunStatus::Failed, "status {:?}", out.status);
    let failing = out.failed_iteration.ok_or("no failed iteration recorded")?;
    let in_failing = out.records.iter().filter(|r| r.iteration == failing).count();
    ensure!(in_failing == 5, "{in_failing} records in the failing iteration");
    Ok("2 invalid per solution -> 20 retries, Completed; cap 5 -> Failed after 5 records".into())
}

fn replay_matches(config: &Path, extra: &[&str], dir: &Path) -> Result<(), String> {
    let run_dir = dir.to_str().ok_or("non-utf8 path")?;
    let mut args = vec!["run", config.to_str().ok_or("non-utf8 path")?, "--out", run_dir];
    args.extend_from_slice(extra);
    optlab(&args)?;
    let replay_dir = dir.join("replayed");
    optlab(&["replay", run_dir, "--out", replay_dir.to_str().ok_or("non-utf8 path")?])?;
    let a = fs::read(dir.join(SUMMARY_FILE)).map_err(|e| e.to_string())?;
    let b = fs::read(replay_dir.join(SUMMARY_FILE)).map_err(|e| e.to_string())?;
    ensure!(a == b, "{}: replayed summary.csv differs", config.display());
    Ok(())
}

fn deterministic_replay() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let configs = workspace().join("configs");
    replay_matches(&configs.join("tsp10_nearest_neighbor.json"), &[], &tmp.path().join("nn"))?;
    replay_matches(
        &configs.join("coord_heuristics.json"),
        &["--backend", r#"{"kind":"scripted","policy":"invalid_then_valid","invalid":1,"then":{"policy":"uniform"}}"#, "--repeats", "2"],
        &tmp.path().join("retry"),
    )?;
    replay_matches(&configs.join("sampling_probe.json"), &["--repeats", "2"], &tmp.path().join("probe"))?;
    Ok("nearest-neighbour, retrying and probe runs replay to identical summary.csv".into())
}

fn hill_climb_sanity() -> Check {
    let start = Instant::now();
    let task = sphere_task()?;
    let prompts = sphere_prompts(&task)?;
    let backend = optlab::backends::HillClimbBackend::new(0.1).map_err(|e| e.to_string())?;
    let mut finals = Vec::new();
    for repeat in 0..5u64 {
        let mut s = backend.open_session(&RunKey::new("hc", 500 + repeat)).map_err(|e| e.to_string())?;
        let out = run_loop(&task, s.as_mut(), &prompts, &loop_config(4, 100, repeat)).map_err(|e| e.to_string())?;
        finals.push(out.best_fitness);
    }
    let hits = finals.iter().filter(|&&f| f < 1e-2).count();
    let took = start.elapsed();
    ensure!(hits >= 4, "{hits}/5 below 1e-2: {finals:?}");
    ensure!(took < Duration::from_secs(10), "took {took:?}");
    Ok(format!("{hits}/5 repeats below 1e-2 in {took:.1?}"))
}

fn probe_statistics() -> Check {
    let run_probe = |policy: ScriptedPolicy| {
        let mut c = ExperimentConfig::new(
            Protocol::SamplingProbe(SamplingProbeConfig::default()),
            optlab::backends::BackendSpec::Scripted(policy.clone()),
        );
        c.seed = 11;
        run_experiment(&c, &ScriptedBackend::new(policy), 4).map_err(|e| e.to_string())
    };
    let uniform = run_probe(ScriptedPolicy::Uniform)?;
    let arm = &uniform.probes[0].result.arm;
    let same_arm: Vec<_> = uniform.probes.iter().filter(|p| &p.result.arm == arm).collect();
    ensure!(same_arm.len() == 5, "{} seeds", same_arm.len());
    let accepted = same_arm
        .iter()
        .filter(|p| p.result.valid == 1000 && p.result.chi_square < p.result.chi_square_critical)
        .count();
    ensure!(accepted >= 4, "uniformity accepted for {accepted}/5 seeds");
    let mass = run_probe(ScriptedPolicy::EchoBest)?;
    ensure!(
        mass.probes.iter().all(|p| p.result.within_epsilon_fraction == 1.0 && p.result.epsilon == 1e-9),
        "point mass left the archive best"
    );
    Ok(format!(
        "uniform accepted in {accepted}/5 seeds (critical {:.3}); point mass 100% within 1e-9",
        same_arm[0].result.chi_square_critical
    ))
}

fn precision_floor() -> Check {
    let mut c = ExperimentConfig::new(
        Protocol::PrecisionSweep {
            function: FunctionKind::Sphere,
            dimension: 2,
            digits: (1..=6).collect(),
            shift: [-0.1, 0.1],
        },
        optlab::backends::BackendSpec::Scripted(ScriptedPolicy::EchoOptimumDisplayed),
    );
    c.seed = 2024;
    c.repeats = 2;
    c.loop_config.max_iterations = 3;
    let backend = c.backend.build().map_err(|e| e.to_string())?;
    let out = run_experiment(&c, backend.as_ref(), 2).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for r in &out.runs {
        let point = &out.points[r.result.point];
        let d = point.decimal_digits as i32;
        let scale = 10f64.powi(d);
        let floor: f64 = point
            .shift
            .as_ref()
            .ok_or("no shift recorded")?
            .iter()
            .map(|&s| ((s * scale).round() / scale - s).powi(2))
            .sum();
        worst = worst.max((r.result.best_fitness - floor).abs());
    }
    ensure!(worst <= 1e-12, "deviation from the rounding floor {worst:e}");
    Ok(format!("d = 1..6 match the rounding floor, worst deviation {worst:e}"))
}

fn pairwise(points: &[Point<f64>]) -> Vec<f64> {
    let mut d = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(points[i].euclidean(points[j]));
        }
    }
    d.sort_by(f64::total_cmp);
    d
}

fn view_homomorphism() -> Check {
    let mut masked_differs = 0;
    for k in 0..20u64 {
        let inst = Instance::random(10, 300 + k).map_err(|e| e.to_string())?;
        let truth = pairwise(inst.coordinates());
        let shifted = make_view(&inst, ViewMode::Shifted, k).map_err(|e| e.to_string())?;
        let s = pairwise(shifted.displayed.as_deref().ok_or("shifted view has no coordinates")?);
        ensure!(
            s.iter().zip(&truth).all(|(a, b)| (a - b).abs() <= 1e-9),
            "instance {k}: shifted distances differ"
        );
        let masked = make_view(&inst, ViewMode::Masked, k).map_err(|e| e.to_string())?;
        let m = pairwise(masked.displayed.as_deref().ok_or("masked view has no coordinates")?);
        if m.iter().zip(&truth).any(|(a, b)| (a - b).abs() > 1e-9) {
            masked_differs += 1;
        }
    }
    ensure!(masked_differs >= 19, "masked differs for only {masked_differs}/20");
    Ok(format!("shifted preserves all 20 multisets; masked differs for {masked_differs}/20"))
}

/// Great-circle distance by the spherical law of cosines.
fn cosine_law_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (p1, l1) = (a.0.to_radians(), a.1.to_radians());
    let (p2, l2) = (b.0.to_radians(), b.1.to_radians());
    let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * (l2 - l1).cos();
    EARTH_RADIUS_KM * c.clamp(-1.0, 1.0).acos()
}

fn haversine_checks() -> Check {
    let p = Point::new(40.7128, -74.0060);
    ensure!(haversine(p, p) == 0.0, "d(p, p) = {}", haversine(p, p));
    let half = haversine(Point::new(0.0, 0.0), Point::new(0.0, 180.0));
    ensure!((half - std::f64::consts::PI * 6371.0).abs() <= 0.01, "antipodal {half}");
    ensure!((half - 20015.09).abs() <= 0.01, "antipodal {half}");
    let la = Point::new(34.0522, -118.2437);
    let ny_la = haversine(p, la);
    let reference = cosine_law_km((40.7128, -74.0060), (34.0522, -118.2437));
    ensure!((ny_la - reference).abs() <= 0.1, "NY-LA {ny_la} vs {reference}");
    let mut rng = rng_from_seed(13);
    let mut geo = || Point::new(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0));
    let mut min_slack = f64::INFINITY;
    for _ in 0..1000 {
        let (a, b, c) = (geo(), geo(), geo());
        ensure!(haversine(a, b) == haversine(b, a), "asymmetric at {a:?}, {b:?}");
        min_slack = min_slack.min(haversine(a, b) + haversine(b, c) - haversine(a, c));
    }
    ensure!(min_slack >= -1e-6, "triangle slack {min_slack}");
    Ok(format!("NY-LA {ny_la:.3} km (reference {reference:.3}); min triangle slack {min_slack:.3e}"))
}

fn end_to_end_smoke() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("smoke");
    let config = workspace().join("configs/tsp10_nearest_neighbor.json");
    let start = Instant::now();
    optlab(&["run", config.to_str().ok_or("non-utf8 path")?, "--out", out.to_str().ok_or("non-utf8 path")?])?;
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(30), "took {took:?}");

    let cfg = ExperimentConfig::load(&config).map_err(|e| e.to_string())?;
    ensure!(cfg.loop_config.max_iterations == 30 && cfg.repeats == 5, "bundled config changed");
    let resolved: Vec<optlab::experiments::PointInfo> =
        serde_json::from_str(&fs::read_to_string(out.join("resolved.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let inst = resolved[0]
        .instance
        .clone()
        .ok_or("no instance recorded")?
        .into_instance()
        .map_err(|e| e.to_string())?;
    ensure!(inst.len() == 10, "{} cities", inst.len());
    let optimum = held_karp_tsp(&inst).map_err(|e| e.to_string())?.optimal_length;

    let summary = fs::read_to_string(out.join(SUMMARY_FILE)).map_err(|e| e.to_string())?;
    let mut reader = csv::Reader::from_reader(summary.as_bytes());
    let headers = reader.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or(format!("no column {name}"));
    let (metric_col, per_col) = (col("metric")?, col("per_repeat")?);
    let row = reader.records().next().ok_or("empty summary")?.map_err(|e| e.to_string())?;
    ensure!(&row[metric_col] == "gap_percent", "metric {}", &row[metric_col]);
    let gaps: Vec<f64> = row[per_col]
        .split(';')
        .map(|v| v.parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    ensure!(gaps.len() == 5, "{} repeats", gaps.len());
    ensure!(gaps.iter().all(|&g| g >= 0.0), "negative gap in {gaps:?}");

    for entry in fs::read_dir(out.join("runs")).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        if !path.to_string_lossy().ends_with(".summary.json") {
            continue;
        }
        let r: optlab::experiments::RunResult =
            serde_json::from_str(&fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure!(r.reference == Some(optimum), "reference {:?} vs Held-Karp {optimum}", r.reference);
        let expected = 100.0 * (r.best_fitness - optimum) / optimum;
        ensure!(
            (r.metric_value - expected.max(0.0)).abs() <= 1e-9,
            "gap {} vs recomputed {expected}",
            r.metric_value
        );
    }
    Ok(format!("5 repeats in {took:.1?}, gaps {gaps:?} against Held-Karp {optimum:.3}"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 14] = [
        ("oracle equivalence", oracle_equivalence),
        ("Held-Karp scale", held_karp_scale),
        ("function correctness", function_correctness),
        ("prompt golden files", prompt_goldens),
        ("parser taxonomy", parser_taxonomy),
        ("engine monotonicity", engine_monotonicity),
        ("retry accounting", retry_accounting),
        ("deterministic replay", deterministic_replay),
        ("baseline-analog sanity", hill_climb_sanity),
        ("sampling probe statistics", probe_statistics),
        ("precision-floor law", precision_floor),
        ("view homomorphism", view_homomorphism),
        ("haversine", haversine_checks),
        ("end-to-end smoke", end_to_end_smoke),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(reason) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {reason}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
