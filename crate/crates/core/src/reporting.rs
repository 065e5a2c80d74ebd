//! Summary tables and plot data, rebuilt purely from the files a run leaves
//! on disk.
//!
//! `summary.csv` columns, in order:
//! `protocol, problem, arm, sweep_value, metric, repeats, completed,
//! failure_count, failure_rate, mean, mean_display, retrials_mean,
//! per_repeat, context_length_errors, prompt_chars_max`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{collect_metrics, RunStats, RunStatus};
use crate::experiments::{MetricKind, PointInfo, ProbeResult, RunResult, CHI_SQUARE_BINS};
use crate::problems::{ContinuousProblem, FunctionKind};
use crate::Problem;

/// Lattice points per axis of landscape grids.
pub const LANDSCAPE_SIZE: usize = 101;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOTDATA_DIR: &str = "plotdata";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0} contains no run or probe results")]
    Empty(String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> ReportError {
    ReportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// One line of `summary.csv`: a (problem, arm, sweep value) aggregated over
/// its repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub protocol: String,
    pub problem: String,
    pub arm: String,
    pub sweep_value: String,
    pub metric: String,
    pub repeats: usize,
    pub completed: usize,
    pub failure_count: usize,
    pub failure_rate: f64,
    /// Mean over completed repeats; "-" when all failed.
    pub mean: String,
    pub mean_display: String,
    pub retrials_mean: String,
    /// Metric per repeat in repeat order, ";"-separated; "-" for failed repeats.
    pub per_repeat: String,
    pub context_length_errors: usize,
    pub prompt_chars_max: usize,
}

/// Shortest string that parses back to the same value.
fn exact(v: f64) -> String {
    format!("{v}")
}

fn display(metric: &str, v: f64) -> String {
    match metric {
        "gap_percent" => format!("{v:.2}%"),
        "best_fitness" => format!("{v:.3e}"),
        _ => format!("{v:.2}"),
    }
}

/// Aggregates run and probe results. Rows follow (point, arm) order for
/// runs, then (arm) order for probes.
pub fn summarize(runs: &[RunResult], probes: &[ProbeResult]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<&RunResult>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.point, r.arm_index)).or_default().push(r);
    }
    let mut rows = Vec::new();
    for mut group in groups.into_values() {
        group.sort_by_key(|r| r.repeat);
        let first = group[0];
        let metric = first.metric.name();
        let agg = collect_metrics(
            &group
                .iter()
                .map(|r| RunStats {
                    status: r.status,
                    metric: r.metric_value,
                    retries: r.total_retries,
                })
                .collect::<Vec<_>>(),
        );
        let per_repeat = group
            .iter()
            .map(|r| match r.status {
                RunStatus::Completed => exact(r.metric_value),
                RunStatus::Failed => "-".into(),
            })
            .collect::<Vec<_>>()
            .join(";");
        rows.push(SummaryRow {
            protocol: first.protocol.clone(),
            problem: first.problem.clone(),
            arm: first.arm.clone(),
            sweep_value: first.sweep_value.map(exact).unwrap_or_default(),
            metric: metric.into(),
            repeats: agg.runs,
            completed: agg.completed,
            failure_count: agg.failed,
            failure_rate: agg.failure_rate,
            mean: agg.mean_metric.map_or("-".into(), exact),
            mean_display: agg.mean_metric.map_or("-".into(), |m| display(metric, m)),
            retrials_mean: agg.mean_retrials.map_or("-".into(), exact),
            per_repeat,
            context_length_errors: group.iter().map(|r| r.context_length_errors).sum(),
            prompt_chars_max: group.iter().map(|r| r.prompt_chars_max).max().unwrap_or(0),
        });
    }

    let mut arms: Vec<(String, Vec<&ProbeResult>)> = Vec::new();
    for p in probes {
        match arms.iter_mut().find(|(a, _)| a == &p.arm) {
            Some((_, v)) => v.push(p),
            None => arms.push((p.arm.clone(), vec![p])),
        }
    }
    for (arm, mut group) in arms {
        group.sort_by_key(|p| p.repeat);
        let n = group.len() as f64;
        let mean = group.iter().map(|p| p.chi_square).sum::<f64>() / n;
        let excluded = group.iter().map(|p| p.excluded as f64).sum::<f64>() / n;
        rows.push(SummaryRow {
            protocol: "sampling_probe".into(),
            problem: format!("{}-2d", group[0].function),
            arm,
            sweep_value: String::new(),
            metric: "chi_square".into(),
            repeats: group.len(),
            completed: group.len(),
            failure_count: 0,
            failure_rate: 0.0,
            mean: exact(mean),
            mean_display: display("chi_square", mean),
            retrials_mean: exact(excluded),
            per_repeat: group.iter().map(|p| exact(p.chi_square)).collect::<Vec<_>>().join(";"),
            context_length_errors: 0,
            prompt_chars_max: group.iter().map(|p| p.prompt.chars().count()).max().unwrap_or(0),
        });
    }
    rows
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Function values on a `size × size` lattice over the problem's box, as
/// `(x, y, value)` with `x` varying fastest. Rosenbrock values are
/// reported as `ln(1 + f)`.
pub fn landscape_grid(problem: &Problem, size: usize) -> Vec<(f64, f64, f64)> {
    assert_eq!(problem.dimension(), 2, "landscapes are two-dimensional");
    let (lo, hi) = (problem.lower(), problem.upper());
    let at = |i: usize| lo + (hi - lo) * i as f64 / (size - 1) as f64;
    let log_scale = problem.kind() == FunctionKind::Rosenbrock;
    let mut out = Vec::with_capacity(size * size);
    for j in 0..size {
        for i in 0..size {
            let (x, y) = (at(i), at(j));
            let f = problem.evaluate(&[x, y]).expect("lattice points lie in the box");
            out.push((x, y, if log_scale { f.ln_1p() } else { f }));
        }
    }
    out
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn files_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, ReportError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(suffix)))
        .collect();
    out.sort();
    Ok(out)
}

/// Loads every `runs/*.summary.json` and `probes/*.json` under `dir`.
pub fn load_results(dir: &Path) -> Result<(Vec<RunResult>, Vec<ProbeResult>), ReportError> {
    let runs = files_with_suffix(&dir.join("runs"), ".summary.json")?
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<Vec<RunResult>, _>>()?;
    let probes = files_with_suffix(&dir.join("probes"), ".json")?
        .iter()
        .map(|p| read_json(p))
        .collect::<Result<Vec<ProbeResult>, _>>()?;
    Ok((runs, probes))
}

struct CsvOut {
    path: PathBuf,
    w: csv::Writer<fs::File>,
}

impl CsvOut {
    fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, ReportError> {
        let path = dir.join(format!("{}.csv", sanitize(name)));
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        Ok(Self { path, w })
    }

    fn row<I, S>(&mut self, fields: I) -> Result<(), ReportError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.w.write_record(fields).map_err(|e| io_err(&self.path, e))
    }

    fn finish(mut self) -> Result<(), ReportError> {
        self.w.flush().map_err(|e| io_err(&self.path, e))
    }
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == '_' { c } else { '_' })
        .collect()
}

fn emit_landscapes(out: &Path, points: &[PointInfo]) -> Result<(), ReportError> {
    for p in points {
        let (Some(function), Some([lo, hi]), Some(shift)) = (&p.function, p.bounds, &p.shift) else {
            continue;
        };
        if shift.len() != 2 {
            continue;
        }
        let Ok(kind) = function.parse::<FunctionKind>() else {
            continue;
        };
        let Ok(problem) = ContinuousProblem::new(kind, 2)
            .and_then(|q| q.with_bounds(lo, hi))
            .and_then(|q| q.with_shift(shift.clone()))
        else {
            continue;
        };
        let log = kind == FunctionKind::Rosenbrock;
        let mut f = CsvOut::create(
            out,
            &format!("landscape_p{:02}-{}", p.point, p.problem),
            &["x", "y", "value", "log_scale"],
        )?;
        for (x, y, v) in landscape_grid(&problem, LANDSCAPE_SIZE) {
            f.row([exact(x), exact(y), exact(v), log.to_string()])?;
        }
        f.finish()?;
    }
    Ok(())
}

fn emit_runs(out: &Path, runs: &[RunResult], rows: &[SummaryRow]) -> Result<(), ReportError> {
    let mut groups: BTreeMap<(usize, usize), Vec<&RunResult>> = BTreeMap::new();
    for r in runs {
        groups.entry((r.point, r.arm_index)).or_default().push(r);
    }
    for ((point, arm_index), mut group) in groups {
        group.sort_by_key(|r| r.repeat);
        let first = group[0];
        let mut f = CsvOut::create(
            out,
            &format!("convergence_p{point:02}-a{arm_index:02}-{}-{}", first.problem, first.arm),
            &["iteration", "repeat", "status", "best_fitness"],
        )?;
        for r in &group {
            let status = match r.status {
                RunStatus::Completed => "completed",
                RunStatus::Failed => "failed",
            };
            for (k, v) in r.trace.iter().enumerate() {
                f.row([k.to_string(), r.repeat.to_string(), status.into(), exact(*v)])?;
            }
        }
        f.finish()?;
    }

    let mut by_protocol: BTreeMap<&str, Vec<&SummaryRow>> = BTreeMap::new();
    for row in rows {
        by_protocol.entry(row.protocol.as_str()).or_default().push(row);
    }
    for (protocol, rows) in by_protocol {
        let mut f = CsvOut::create(
            out,
            &format!("bars_{protocol}"),
            &["problem", "arm", "sweep_value", "metric", "mean", "std", "completed", "failure_count"],
        )?;
        for row in rows {
            let values: Vec<f64> = row.per_repeat.split(';').filter_map(|v| v.parse().ok()).collect();
            f.row([
                row.problem.clone(),
                row.arm.clone(),
                row.sweep_value.clone(),
                row.metric.clone(),
                row.mean.clone(),
                std_dev(&values).map_or("-".into(), exact),
                row.completed.to_string(),
                row.failure_count.to_string(),
            ])?;
        }
        f.finish()?;
    }
    Ok(())
}

/// Sample standard deviation; `None` below two values.
fn std_dev(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    Some((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn emit_probes(out: &Path, probes: &[ProbeResult]) -> Result<(), ReportError> {
    let mut arms: Vec<&str> = Vec::new();
    for p in probes {
        if !arms.contains(&p.arm.as_str()) {
            arms.push(&p.arm);
        }
    }
    for arm in arms {
        let mut group: Vec<&ProbeResult> = probes.iter().filter(|p| p.arm == arm).collect();
        group.sort_by_key(|p| p.repeat);

        let mut scatter = CsvOut::create(out, &format!("probe_scatter_{arm}"), &["repeat", "x", "y"])?;
        let mut dist = CsvOut::create(out, &format!("probe_distance_{arm}"), &["repeat", "distance"])?;
        let mut hist = CsvOut::create(
            out,
            &format!("probe_hist_{arm}"),
            &["repeat", "bin_x", "bin_y", "x_low", "x_high", "y_low", "y_high", "count"],
        )?;
        for p in &group {
            let r = p.repeat.to_string();
            for s in &p.samples {
                scatter.row([r.clone(), exact(s[0]), exact(s[1])])?;
            }
            for d in &p.distances_to_best {
                dist.row([r.clone(), exact(*d)])?;
            }
            let [lo, hi] = p.bounds;
            let bins = CHI_SQUARE_BINS;
            let width = (hi - lo) / bins as f64;
            let cell = |v: f64| (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
            let mut counts = vec![0usize; bins * bins];
            for s in &p.samples {
                counts[cell(s[0]) * bins + cell(s[1])] += 1;
            }
            for bx in 0..bins {
                for by in 0..bins {
                    hist.row([
                        r.clone(),
                        bx.to_string(),
                        by.to_string(),
                        exact(lo + width * bx as f64),
                        exact(lo + width * (bx + 1) as f64),
                        exact(lo + width * by as f64),
                        exact(lo + width * (by + 1) as f64),
                        counts[bx * bins + by].to_string(),
                    ])?;
                }
            }
        }
        scatter.finish()?;
        dist.finish()?;
        hist.finish()?;

        let mut archive = CsvOut::create(out, &format!("probe_archive_{arm}"), &["rank", "x", "y", "fitness"])?;
        for (rank, (x, f)) in group[0].archive.iter().enumerate() {
            archive.row([rank.to_string(), exact(x[0]), exact(x[1]), exact(*f)])?;
        }
        archive.finish()?;
    }
    Ok(())
}

/// Rebuilds `summary.csv` and `plotdata/` from the run files under `dir`.
/// Output depends only on those files, so repeated calls are idempotent.
pub fn regenerate(dir: &Path) -> Result<Vec<SummaryRow>, ReportError> {
    let (runs, probes) = load_results(dir)?;
    if runs.is_empty() && probes.is_empty() {
        return Err(ReportError::Empty(dir.display().to_string()));
    }
    let rows = summarize(&runs, &probes);
    write_summary(&dir.join(SUMMARY_FILE), &rows)?;

    let out = dir.join(PLOTDATA_DIR);
    if out.exists() {
        fs::remove_dir_all(&out).map_err(|e| io_err(&out, e))?;
    }
    fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
    let resolved = dir.join("resolved.json");
    if resolved.is_file() {
        let points: Vec<PointInfo> = read_json(&resolved)?;
        emit_landscapes(&out, &points)?;
    }
    emit_runs(&out, &runs, &rows)?;
    emit_probes(&out, &probes)?;
    Ok(rows)
}

/// Mean of the numeric `per_repeat` cells, as the `mean` column reports it.
pub fn recompute_mean(per_repeat: &str) -> Option<f64> {
    let values: Vec<f64> = per_repeat.split(';').filter_map(|v| v.parse().ok()).collect();
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl MetricKind {
    /// Formats a mean for human reading, as in the `mean_display` column.
    pub fn display(self, v: f64) -> String {
        display(self.name(), v)
    }
}
