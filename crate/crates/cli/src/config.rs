//! Experiment config: one JSON document per discovery run.
//!
//! ```json
//! {
//!   "run_id": "scripted-demo",
//!   "iterations": 5,
//!   "target_metric": "throughput",
//!   "token_budget": 100000,
//!   "traces": "canonical",
//!   "provider": { "kind": "scripted", "script_dir": "../scripted_discovery" }
//! }
//! ```
//!
//! Relative paths (`traces` directories, `provider.script_dir`, `out_dir`)
//! are resolved against the directory holding the config file. API keys are
//! never part of the config, only the name of the variable holding one.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use schedforge::discovery::{DiscoveryConfig, TargetMetric};
use schedforge::llm::{GenerationParams, ProviderConfig};
use schedforge::policy::DEFAULT_MAX_STEPS;
use schedforge::sim::SimConfig;

use crate::error::CliError;
use crate::traces::resolve_traces;

fn default_max_steps() -> u64 {
    DEFAULT_MAX_STEPS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Defaults to the config file's stem.
    #[serde(default)]
    pub run_id: Option<String>,
    pub iterations: usize,
    pub target_metric: TargetMetric,
    pub token_budget: u64,
    /// `canonical`, a preset name, or a directory of `.trace.jsonl` files.
    pub traces: String,
    #[serde(default)]
    pub sim_config: Option<SimConfig>,
    pub provider: ProviderConfig,
    #[serde(default)]
    pub generation: GenerationParams,
    #[serde(default = "default_max_steps")]
    pub max_steps: u64,
    /// Parent of the run directory; defaults to `runs` next to the config.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// A config with paths resolved and traces loaded.
#[derive(Clone, Debug)]
pub struct LoadedExperiment {
    pub discovery: DiscoveryConfig,
    pub run_dir: PathBuf,
}

pub fn load_experiment(path: &Path) -> Result<LoadedExperiment, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    resolve(config, base, path.file_stem().and_then(|s| s.to_str()).unwrap_or("run"))
}

fn resolve(config: ExperimentConfig, base: &Path, default_id: &str) -> Result<LoadedExperiment, CliError> {
    if config.iterations == 0 {
        return Err(CliError::input("iterations must be >= 1"));
    }
    let run_id = config.run_id.unwrap_or_else(|| default_id.to_string());
    if run_id.is_empty() || run_id.contains(['/', '\\']) || run_id == "." || run_id == ".." {
        return Err(CliError::input(format!(
            "run_id `{run_id}` is not a plain directory name"
        )));
    }
    let mut provider = config.provider;
    if let Some(dir) = &provider.script_dir {
        provider.script_dir = Some(base.join(dir));
    }
    let traces = resolve_traces(&config.traces, base)?
        .into_iter()
        .map(|t| t.trace)
        .collect();
    let discovery = DiscoveryConfig {
        run_id: run_id.clone(),
        iterations: config.iterations,
        target_metric: config.target_metric,
        token_budget: config.token_budget,
        traces,
        sim_config: config.sim_config.unwrap_or_default(),
        provider,
        generation: config.generation,
        max_steps: config.max_steps,
    };
    discovery.validate().map_err(|e| CliError::input(e.to_string()))?;
    let run_dir = base
        .join(config.out_dir.unwrap_or_else(|| PathBuf::from("runs")))
        .join(run_id);
    Ok(LoadedExperiment { discovery, run_dir })
}
