//! The `schedforge` command line: generate traces, simulate a policy, run a
//! discovery experiment, and report on a finished run.
//!
//! Exit codes: 0 ok, 1 output I/O failure, 2 bad input, 3 policy error,
//! 4 provider failure.

pub mod config;
mod error;
pub mod report;
pub mod traces;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use schedforge::discovery::{median, run_discovery, DiscoveryError, TargetMetric};
use schedforge::llm::{provider_from_config, ProviderErrorKind};
use schedforge::policy::{NativeFifo, PolicyInstance, PolicyProgram, DEFAULT_MAX_STEPS};
use schedforge::sim::{run, write_assignment_log, Policy, SimConfig, SimError, SimMetrics};

pub use error::{CliError, EXIT_INPUT, EXIT_IO, EXIT_OK, EXIT_POLICY, EXIT_PROVIDER};
use report::improvement_percent;
use traces::{params_traces, preset_traces, resolve_traces, write_traces, NamedTrace};

pub enum TraceSource<'a> {
    Preset(&'a str),
    Params(&'a Path),
}

/// Writes the traces; returns their paths in generation order.
pub fn cmd_gen_traces(source: TraceSource<'_>, seeds: &[u64], out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let traces = match source {
        TraceSource::Preset(name) => preset_traces(name, seeds)?,
        TraceSource::Params(path) => params_traces(path, seeds)?,
    };
    write_traces(&traces, out)
}

#[derive(Clone, Debug)]
pub enum PolicyChoice {
    NativeFifo,
    File(PathBuf),
}

pub struct SimulateArgs<'a> {
    pub policy: PolicyChoice,
    pub traces: &'a str,
    pub sim_config: Option<&'a Path>,
    pub target_metric: TargetMetric,
    pub max_steps: u64,
    pub assignment_log_dir: Option<&'a Path>,
}

impl<'a> SimulateArgs<'a> {
    pub fn new(policy: PolicyChoice, traces: &'a str) -> Self {
        SimulateArgs {
            policy,
            traces,
            sim_config: None,
            target_metric: TargetMetric::Throughput,
            max_steps: DEFAULT_MAX_STEPS,
            assignment_log_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMetrics {
    pub name: String,
    pub params_fingerprint: String,
    pub seed: u64,
    pub metrics: SimMetrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub policy: String,
    pub target_metric: TargetMetric,
    pub traces: Vec<TraceMetrics>,
    /// Median of the target metric; a trace without a p99 counts as `max_ticks`.
    pub median_score: f64,
}

fn load_sim_config(path: Option<&Path>) -> Result<SimConfig, CliError> {
    let Some(path) = path else {
        return Ok(SimConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let config: SimConfig =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    config.validate().map_err(|e| CliError::input(e.to_string()))?;
    Ok(config)
}

fn load_policy(path: &Path) -> Result<Arc<PolicyProgram>, CliError> {
    let source = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    PolicyProgram::load(&source)
        .map(Arc::new)
        .map_err(|e| CliError::policy(format!("{}: {e}", path.display())))
}

fn simulate_one(
    trace: &NamedTrace,
    policy: &mut dyn Policy,
    config: &SimConfig,
) -> Result<schedforge::sim::RunOutput, CliError> {
    run(&trace.trace.pipelines, policy, config).map_err(|e| match e {
        SimError::PolicyRuntime { .. } => CliError::policy(format!("trace {}: {e}", trace.name)),
        _ => CliError::input(format!("trace {}: {e}", trace.name)),
    })
}

/// Runs the policy over every trace, fresh state per trace.
pub fn cmd_simulate(args: &SimulateArgs<'_>) -> Result<SimulateReport, CliError> {
    let config = load_sim_config(args.sim_config)?;
    let program = match &args.policy {
        PolicyChoice::NativeFifo => None,
        PolicyChoice::File(path) => Some(load_policy(path)?),
    };
    let traces = resolve_traces(args.traces, Path::new(""))?;
    if let Some(dir) = args.assignment_log_dir {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }

    let mut results = Vec::with_capacity(traces.len());
    for trace in &traces {
        let output = match &program {
            None => simulate_one(trace, &mut NativeFifo::new(), &config)?,
            Some(program) => {
                let mut instance = PolicyInstance::new(program.clone(), args.max_steps)
                    .map_err(|e| CliError::policy(format!("init: {e}")))?;
                simulate_one(trace, &mut instance, &config)?
            }
        };
        if let Some(dir) = args.assignment_log_dir {
            let path = dir.join(format!("{}.assignments.jsonl", trace.name));
            let file = File::create(&path).map_err(|e| CliError::io(path.display(), e))?;
            let mut w = BufWriter::new(file);
            write_assignment_log(&mut w, &output.assignment_log)
                .and_then(|_| w.flush())
                .map_err(|e| CliError::io(path.display(), e))?;
        }
        results.push(TraceMetrics {
            name: trace.name.clone(),
            params_fingerprint: trace.trace.params_fingerprint.clone(),
            seed: trace.trace.seed,
            metrics: output.metrics,
        });
    }

    let values: Vec<f64> = results
        .iter()
        .map(|t| args.target_metric.value(&t.metrics, config.max_ticks))
        .collect();
    Ok(SimulateReport {
        policy: match &args.policy {
            PolicyChoice::NativeFifo => "fifo".to_string(),
            PolicyChoice::File(path) => path.display().to_string(),
        },
        target_metric: args.target_metric,
        traces: results,
        median_score: median(&values).expect("trace sources are never empty"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestSummary {
    pub iteration: usize,
    pub score: f64,
    pub improvement_percent: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoverSummary {
    pub run_id: String,
    pub run_dir: PathBuf,
    pub status: String,
    pub completed_iterations: usize,
    pub target_metric: TargetMetric,
    pub baseline_score: f64,
    pub best: Option<BestSummary>,
    pub total_cost_usd: f64,
    pub total_time_seconds: f64,
}

fn discovery_error(e: DiscoveryError) -> CliError {
    match e {
        DiscoveryError::Config(_) | DiscoveryError::BudgetImpossible { .. } => CliError::input(e.to_string()),
        DiscoveryError::Provider { .. } => CliError::provider(e.to_string()),
        DiscoveryError::Baseline(_) => CliError::input(format!("baseline failed: {e}")),
        DiscoveryError::Io(ref io) => CliError {
            code: EXIT_IO,
            message: io.to_string(),
        },
    }
}

/// Runs the experiment in `config`, writing `<out_dir>/<run_id>/`.
pub fn cmd_discover(config: &Path) -> Result<DiscoverSummary, CliError> {
    let experiment = config::load_experiment(config)?;
    let discovery = &experiment.discovery;
    let mut provider = provider_from_config(&discovery.provider).map_err(|e| match e.kind {
        ProviderErrorKind::Config | ProviderErrorKind::ScriptExhausted => CliError::input(e.to_string()),
        _ => CliError::provider(e.to_string()),
    })?;
    let outcome = run_discovery(discovery, provider.as_mut(), Some(&experiment.run_dir)).map_err(discovery_error)?;
    let manifest = &outcome.manifest;
    Ok(DiscoverSummary {
        run_id: manifest.run_id.clone(),
        run_dir: experiment.run_dir.clone(),
        status: manifest.status.clone(),
        completed_iterations: manifest.completed_iterations,
        target_metric: manifest.target_metric,
        baseline_score: manifest.baseline_score,
        best: outcome.best.as_ref().map(|b| BestSummary {
            iteration: b.iteration,
            score: b.score,
            improvement_percent: improvement_percent(b.improvement_vs_baseline),
        }),
        total_cost_usd: manifest.ledger.total_cost_usd,
        total_time_seconds: manifest.ledger.total_time_seconds,
    })
}

/// Summary of a run directory; with `csv`, also writes the trajectory there.
pub fn cmd_report(run_dir: &Path, csv: Option<&Path>) -> Result<report::Report, CliError> {
    let report = report::build_report(run_dir)?;
    if let Some(path) = csv {
        report::write_csv(&report, path)?;
    }
    Ok(report)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}
