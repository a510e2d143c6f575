use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use schedforge::discovery::{select_best, IterationRecord, RunManifest, TargetMetric};

use crate::error::CliError;

/// `(improvement - 1) * 100`, so positive always means better than FIFO.
pub fn improvement_percent(improvement: Option<f64>) -> Option<f64> {
    improvement.map(|x| (x - 1.0) * 100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub valid: bool,
    pub score: Option<f64>,
    pub error_kind: Option<String>,
    pub tokens_in: Option<u64>,
    pub tokens_out: Option<u64>,
    pub cost_usd: Option<f64>,
    pub latency_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub status: String,
    pub target_metric: TargetMetric,
    pub iterations: usize,
    pub completed_iterations: usize,
    pub baseline_score: f64,
    pub best_iteration: Option<usize>,
    pub best_score: Option<f64>,
    pub improvement_percent: Option<f64>,
    pub total_cost_usd: f64,
    pub total_time_seconds: f64,
    pub total_tokens_in: u64,
    pub total_tokens_out: u64,
    pub trajectory: Vec<TrajectoryPoint>,
}

pub fn read_manifest(run_dir: &Path) -> Result<RunManifest, CliError> {
    let path = run_dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: corrupt manifest: {e}", path.display())))
}

pub fn read_records(run_dir: &Path) -> Result<Vec<IterationRecord>, CliError> {
    let path = run_dir.join("records.jsonl");
    let text = fs::read_to_string(&path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| CliError::input(format!("{}: line {}: corrupt record: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn build_report(run_dir: &Path) -> Result<Report, CliError> {
    let manifest = read_manifest(run_dir)?;
    let records = read_records(run_dir)?;
    let target = manifest.target_metric;
    let best = select_best(&records, target, Some(manifest.baseline_score));
    let trajectory = records
        .iter()
        .map(|r| {
            let entry = manifest.ledger.entries.iter().find(|e| e.iteration == r.iteration);
            TrajectoryPoint {
                iteration: r.iteration,
                valid: r.valid,
                score: r.score,
                error_kind: r.error.as_ref().map(|e| e.kind.clone()),
                tokens_in: entry.map(|e| e.tokens_in),
                tokens_out: entry.map(|e| e.tokens_out),
                cost_usd: entry.map(|e| e.cost_usd),
                latency_seconds: entry.map(|e| e.latency_seconds),
            }
        })
        .collect();
    Ok(Report {
        run_id: manifest.run_id,
        status: manifest.status,
        target_metric: target,
        iterations: manifest.iterations,
        completed_iterations: records.len(),
        baseline_score: manifest.baseline_score,
        best_iteration: best.as_ref().map(|b| b.iteration),
        best_score: best.as_ref().map(|b| b.score),
        improvement_percent: improvement_percent(best.and_then(|b| b.improvement_vs_baseline)),
        total_cost_usd: manifest.ledger.total_cost_usd,
        total_time_seconds: manifest.ledger.total_time_seconds,
        total_tokens_in: manifest.ledger.total_tokens_in,
        total_tokens_out: manifest.ledger.total_tokens_out,
        trajectory,
    })
}

/// One row per iteration.
pub fn write_csv(report: &Report, path: &Path) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError {
        code: crate::error::EXIT_IO,
        message: format!("{}: {e}", path.display()),
    };
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    for point in &report.trajectory {
        w.serialize(point).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}
