use serde::{Deserialize, Serialize};

use super::RunStatus;

/// Per-run inputs to aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub status: RunStatus,
    /// Gap percentage, best fitness or tour length, depending on the study.
    pub metric: f64,
    pub retries: usize,
}

/// Repeat-averaged metrics. Means cover completed runs only; when every run
/// failed they are `None` and reports print "-".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub completed: usize,
    pub failed: usize,
    pub failure_rate: f64,
    pub mean_metric: Option<f64>,
    pub mean_retrials: Option<f64>,
}

impl Aggregate {
    pub fn is_available(&self) -> bool {
        self.mean_metric.is_some()
    }
}

pub fn collect_metrics(stats: &[RunStats]) -> Aggregate {
    let completed: Vec<&RunStats> = stats
        .iter()
        .filter(|s| s.status == RunStatus::Completed)
        .collect();
    let failed = stats.len() - completed.len();
    let mean = |values: Vec<f64>| -> Option<f64> {
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    Aggregate {
        runs: stats.len(),
        completed: completed.len(),
        failed,
        failure_rate: if stats.is_empty() {
            0.0
        } else {
            failed as f64 / stats.len() as f64
        },
        mean_metric: mean(completed.iter().map(|s| s.metric).collect()),
        mean_retrials: mean(completed.iter().map(|s| s.retries as f64).collect()),
    }
}
