//! wasm-bindgen bindings behind `www/index.html`. Every export takes and
//! returns plain strings (JSON out) so the page needs no bundler.

use std::sync::Arc;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use schedforge::policy::{InterpError, NativeFifo, PolicyInstance, PolicyProgram, DEFAULT_MAX_STEPS, FIFO_SOURCE};
use schedforge::sim::{init_sim, Policy, SimConfig, SimMetrics};
use schedforge::workload::{generate_trace, preset, Trace, PRESETS};

#[derive(Debug, Serialize)]
pub struct TraceSummary {
    pub preset: String,
    pub seed: u64,
    pub params_fingerprint: String,
    pub pipelines: usize,
    pub ops: usize,
    pub interactive_fraction: f64,
    pub last_arrival: u64,
}

#[derive(Debug, Serialize)]
pub struct PolicyCheck {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<InterpError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pretty: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct SimulationResult {
    pub metrics: SimMetrics,
    /// Cluster cpu in use after each tick, as a fraction of total capacity.
    pub cpu_utilization: Vec<f64>,
    pub assignments: usize,
    pub suspensions: usize,
}

fn trace_for(preset_name: &str, seed: u64) -> Result<Trace, String> {
    let p = preset(preset_name).ok_or_else(|| {
        let names: Vec<_> = PRESETS.iter().map(|p| p.name).collect();
        format!("unknown preset `{preset_name}` (expected one of {})", names.join(", "))
    })?;
    generate_trace(&p.params, seed).map_err(|e| e.to_string())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("demo types serialize")
}

pub fn summarize(preset_name: &str, seed: u64) -> Result<TraceSummary, String> {
    let trace = trace_for(preset_name, seed)?;
    Ok(TraceSummary {
        preset: preset_name.to_string(),
        seed,
        params_fingerprint: trace.params_fingerprint.clone(),
        pipelines: trace.pipelines.len(),
        ops: trace.num_ops(),
        interactive_fraction: trace.interactive_fraction(),
        last_arrival: trace.pipelines.last().map_or(0, |p| p.arrival_tick),
    })
}

pub fn check(source: &str) -> PolicyCheck {
    match PolicyProgram::load(source) {
        Ok(program) => PolicyCheck {
            ok: true,
            error: None,
            pretty: Some(program.pretty()),
        },
        Err(e) => PolicyCheck {
            ok: false,
            error: Some(e),
            pretty: None,
        },
    }
}

/// Empty `source` runs the native FIFO baseline.
pub fn simulate_trace(preset_name: &str, seed: u64, source: &str) -> Result<SimulationResult, String> {
    let trace = trace_for(preset_name, seed)?;
    let config = SimConfig::default();
    let total_cpu: u32 = config.pools.iter().map(|p| p.cpu_capacity).sum();
    let mut policy: Box<dyn Policy> = if source.trim().is_empty() {
        Box::new(NativeFifo::new())
    } else {
        let program = PolicyProgram::load(source).map_err(|e| e.to_string())?;
        Box::new(PolicyInstance::new(Arc::new(program), DEFAULT_MAX_STEPS).map_err(|e| e.to_string())?)
    };
    let mut sim = init_sim(&trace.pipelines, config).map_err(|e| e.to_string())?;
    let mut cpu_utilization = Vec::new();
    while !sim.is_done() {
        sim.step(policy.as_mut()).map_err(|e| e.to_string())?;
        let used: u32 = sim.state().pool_usage.iter().map(|u| u.cpu_used).sum();
        cpu_utilization.push(f64::from(used) / f64::from(total_cpu));
    }
    let suspensions = sim.state().suspension_log.len();
    let out = sim.finish();
    Ok(SimulationResult {
        metrics: out.metrics,
        cpu_utilization,
        assignments: out.assignment_log.len(),
        suspensions,
    })
}

#[wasm_bindgen]
pub fn fifo_source() -> String {
    FIFO_SOURCE.to_string()
}

#[wasm_bindgen]
pub fn preset_names() -> String {
    json(&PRESETS.iter().map(|p| p.name).collect::<Vec<_>>())
}

/// JSON [`TraceSummary`].
#[wasm_bindgen]
pub fn generate(preset_name: &str, seed: u64) -> Result<String, JsError> {
    summarize(preset_name, seed)
        .map(|s| json(&s))
        .map_err(|e| JsError::new(&e))
}

/// JSON [`PolicyCheck`].
#[wasm_bindgen]
pub fn check_policy(source: &str) -> String {
    json(&check(source))
}

/// JSON [`SimulationResult`].
#[wasm_bindgen]
pub fn simulate(preset_name: &str, seed: u64, source: &str) -> Result<String, JsError> {
    simulate_trace(preset_name, seed, source)
        .map(|r| json(&r))
        .map_err(|e| JsError::new(&e))
}
