//! Seeded DAG workload generation and the `.trace.jsonl` file format.
//!
//! Draw order for one trace (all draws are [`TraceRng::uniform`] based):
//!
//! 1. Arrivals: exponential gaps from tick 0 until the running sum passes `horizon`.
//! 2. Per pipeline, in arrival order:
//!    class (1 draw), size (1), then layer by layer: width (1) and for each op of a
//!    non-first layer a mandatory parent from the previous layer (1) followed by one
//!    extra-edge draw per remaining previous-layer op; then durations (2 per op, Box-Muller),
//!    then resources (cpu then mem per op).
//!
//! Op and pipeline ids are sequential across the whole trace.

mod format;
mod presets;
mod rng;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::sim::{OpSpec, PipelineSpec, SimError, Tick, WorkloadClass};

pub use format::{export_trace, import_trace, read_trace_file, write_trace_file, TRACE_FORMAT};
pub use presets::{canonical_suite, preset, presets, trace_name, Preset, CANONICAL_SEEDS, PRESETS};
pub use rng::TraceRng;

/// Probability that an op also depends on each non-parent op of the previous layer.
pub const EXTRA_EDGE_PROB: f64 = 0.3;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error("invalid workload params: {0}")]
    InvalidParams(String),
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid trace: {0}")]
    InvalidTrace(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormal {
    pub mu: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassParams {
    pub duration_lognormal: LogNormal,
    pub cpu_range: (u32, u32),
    pub mem_range: (u32, u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    /// Mean pipeline arrivals per tick.
    pub arrival_rate: f64,
    pub horizon: Tick,
    pub interactive_fraction: f64,
    pub ops_range: (u32, u32),
    pub layer_width_range: (u32, u32),
    pub interactive: ClassParams,
    pub batch: ClassParams,
    pub timeout_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub params_fingerprint: String,
    pub seed: u64,
    pub pipelines: Vec<PipelineSpec>,
}

fn check_range<T: PartialOrd + std::fmt::Debug>(name: &str, (lo, hi): (T, T)) -> Result<(), WorkloadError> {
    if lo > hi {
        return Err(WorkloadError::InvalidParams(format!("{name}: min {lo:?} > max {hi:?}")));
    }
    Ok(())
}

impl ClassParams {
    fn validate(&self, class: &str) -> Result<(), WorkloadError> {
        let LogNormal { mu, sigma } = self.duration_lognormal;
        if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(WorkloadError::InvalidParams(format!(
                "{class}.duration_lognormal needs finite mu and sigma >= 0"
            )));
        }
        check_range(&format!("{class}.cpu_range"), self.cpu_range)?;
        check_range(&format!("{class}.mem_range"), self.mem_range)?;
        if self.cpu_range.0 == 0 {
            return Err(WorkloadError::InvalidParams(format!(
                "{class}.cpu_range must start at 1 or more"
            )));
        }
        Ok(())
    }

    fn max_cpu(&self) -> u32 {
        self.cpu_range.1
    }
}

impl WorkloadParams {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.arrival_rate.is_finite() && self.arrival_rate > 0.0) {
            return Err(WorkloadError::InvalidParams("arrival_rate must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.interactive_fraction) {
            return Err(WorkloadError::InvalidParams(
                "interactive_fraction must be in [0, 1]".into(),
            ));
        }
        check_range("ops_range", self.ops_range)?;
        check_range("layer_width_range", self.layer_width_range)?;
        if self.ops_range.0 == 0 || self.layer_width_range.0 == 0 {
            return Err(WorkloadError::InvalidParams(
                "ops_range and layer_width_range must start at 1 or more".into(),
            ));
        }
        if !(self.timeout_factor.is_finite() && self.timeout_factor >= 1.0) {
            return Err(WorkloadError::InvalidParams("timeout_factor must be >= 1".into()));
        }
        self.interactive.validate("interactive")?;
        self.batch.validate("batch")
    }

    /// Largest cpu request any generated op can have.
    pub fn max_cpu_req(&self) -> u32 {
        self.interactive.max_cpu().max(self.batch.max_cpu())
    }

    /// First 16 hex chars of sha256 over the params' JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("params serialize");
        hex::encode(&Sha256::digest(json.as_bytes())[..8])
    }

    fn class(&self, class: WorkloadClass) -> &ClassParams {
        match class {
            WorkloadClass::Interactive => &self.interactive,
            WorkloadClass::Batch => &self.batch,
        }
    }
}

pub fn generate_trace(params: &WorkloadParams, seed: u64) -> Result<Trace, WorkloadError> {
    params.validate()?;
    let mut rng = TraceRng::new(seed);

    let mut arrivals = Vec::new();
    let mut t: Tick = 0;
    loop {
        t = t.saturating_add(rng.exponential_gap(params.arrival_rate));
        if t > params.horizon {
            break;
        }
        arrivals.push(t);
    }

    let mut next_op: u64 = 0;
    let mut pipelines = Vec::with_capacity(arrivals.len());
    for (pipeline_id, &arrival_tick) in arrivals.iter().enumerate() {
        let pipeline_id = pipeline_id as u64;
        let workload_class = if rng.bernoulli(params.interactive_fraction) {
            WorkloadClass::Interactive
        } else {
            WorkloadClass::Batch
        };
        let size = rng.uniform_int(params.ops_range.0 as u64, params.ops_range.1 as u64) as usize;

        // deps[i] lists local indices of op i's parents
        let mut deps: Vec<Vec<usize>> = Vec::with_capacity(size);
        let mut prev: Vec<usize> = Vec::new();
        while deps.len() < size {
            let width = rng.uniform_int(params.layer_width_range.0 as u64, params.layer_width_range.1 as u64) as usize;
            let width = width.min(size - deps.len());
            let start = deps.len();
            for _ in 0..width {
                let mut parents = Vec::new();
                if !prev.is_empty() {
                    let parent = prev[rng.uniform_int(0, prev.len() as u64 - 1) as usize];
                    parents.push(parent);
                    for &other in prev.iter().filter(|&&p| p != parent) {
                        if rng.bernoulli(EXTRA_EDGE_PROB) {
                            parents.push(other);
                        }
                    }
                    parents.sort_unstable();
                }
                deps.push(parents);
            }
            prev = (start..deps.len()).collect();
        }

        let class = params.class(workload_class);
        let durations: Vec<Tick> = (0..size)
            .map(|_| rng.lognormal_ticks(class.duration_lognormal.mu, class.duration_lognormal.sigma))
            .collect();
        let mut ops = Vec::with_capacity(size);
        for (i, parents) in deps.into_iter().enumerate() {
            let cpu_req = rng.uniform_int(class.cpu_range.0 as u64, class.cpu_range.1 as u64) as u32;
            let mem_req = rng.uniform_int(class.mem_range.0 as u64, class.mem_range.1 as u64) as u32;
            ops.push(OpSpec {
                op_id: next_op + i as u64,
                pipeline_id,
                cpu_req,
                mem_req,
                duration: durations[i],
                deps: parents.into_iter().map(|p| next_op + p as u64).collect(),
            });
        }
        next_op += size as u64;

        let mut pipeline = PipelineSpec {
            pipeline_id,
            arrival_tick,
            workload_class,
            ops,
            timeout: 0,
        };
        let critical = pipeline.critical_path()?;
        pipeline.timeout = (params.timeout_factor * critical as f64).ceil() as Tick;
        pipelines.push(pipeline);
    }

    Ok(Trace {
        params_fingerprint: params.fingerprint(),
        seed,
        pipelines,
    })
}

/// Random but valid params, for fuzzing. Ops fit the default 16-cpu pools.
pub fn fuzz_params(seed: u64) -> WorkloadParams {
    let mut rng = TraceRng::new(seed ^ 0x5eed_f00d);
    let mut range = |lo: u64, hi: u64| {
        let a = rng.uniform_int(lo, hi);
        let b = rng.uniform_int(lo, hi);
        (a.min(b) as u32, a.max(b) as u32)
    };
    let ops_range = range(1, 8);
    let layer_width_range = range(1, 4);
    let icpu = range(1, 4);
    let imem = range(64, 2048);
    let bcpu = range(1, 16);
    let bmem = range(256, 16384);
    WorkloadParams {
        arrival_rate: 0.05 + rng.uniform() * 0.6,
        horizon: rng.uniform_int(20, 300),
        interactive_fraction: rng.uniform(),
        ops_range,
        layer_width_range,
        interactive: ClassParams {
            duration_lognormal: LogNormal {
                mu: rng.uniform() * 1.5,
                sigma: rng.uniform(),
            },
            cpu_range: icpu,
            mem_range: imem,
        },
        batch: ClassParams {
            duration_lognormal: LogNormal {
                mu: 1.0 + rng.uniform() * 2.5,
                sigma: rng.uniform() * 1.5,
            },
            cpu_range: bcpu,
            mem_range: bmem,
        },
        timeout_factor: 1.0 + rng.uniform() * 4.0,
    }
}

impl Trace {
    /// PipelineSpec invariants plus sorted arrivals and globally unique ids.
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let mut ops = std::collections::HashSet::new();
        let mut ids = std::collections::HashSet::new();
        for (i, p) in self.pipelines.iter().enumerate() {
            p.validate()?;
            if i > 0 && self.pipelines[i - 1].arrival_tick > p.arrival_tick {
                return Err(SimError::InvalidTrace(format!("pipeline {} arrives out of order", p.pipeline_id)).into());
            }
            if !ids.insert(p.pipeline_id) {
                return Err(SimError::InvalidTrace(format!("duplicate pipeline id {}", p.pipeline_id)).into());
            }
            for op in &p.ops {
                if !ops.insert(op.op_id) {
                    return Err(SimError::InvalidTrace(format!("duplicate op id {}", op.op_id)).into());
                }
            }
        }
        Ok(())
    }

    pub fn interactive_fraction(&self) -> f64 {
        if self.pipelines.is_empty() {
            return 0.0;
        }
        let n = self
            .pipelines
            .iter()
            .filter(|p| p.workload_class == WorkloadClass::Interactive)
            .count();
        n as f64 / self.pipelines.len() as f64
    }

    pub fn num_ops(&self) -> usize {
        self.pipelines.iter().map(|p| p.ops.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bad_params_are_rejected() {
        let mut p = preset("interactive-heavy").unwrap().params.clone();
        p.arrival_rate = 0.0;
        assert!(matches!(generate_trace(&p, 1), Err(WorkloadError::InvalidParams(_))));
        let mut p = preset("interactive-heavy").unwrap().params.clone();
        p.ops_range = (5, 2);
        assert!(matches!(generate_trace(&p, 1), Err(WorkloadError::InvalidParams(_))));
        let mut p = preset("interactive-heavy").unwrap().params.clone();
        p.batch.duration_lognormal.sigma = -1.0;
        assert!(generate_trace(&p, 1).is_err());
        let mut p = preset("interactive-heavy").unwrap().params.clone();
        p.timeout_factor = 0.5;
        assert!(generate_trace(&p, 1).is_err());
    }

    #[test]
    fn fingerprint_is_16_hex_chars() {
        let fp = preset("batch-heavy").unwrap().params.fingerprint();
        assert_eq!(fp.len(), 16);
        assert!(fp.chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn single_layer_pipelines_have_no_deps() {
        let mut p = preset("interactive-heavy").unwrap().params.clone();
        p.layer_width_range = (50, 50);
        p.ops_range = (1, 10);
        let t = generate_trace(&p, 9).unwrap();
        assert!(t.pipelines.iter().flat_map(|p| &p.ops).all(|o| o.deps.is_empty()));
    }

    #[test]
    fn chains_when_width_is_one() {
        let mut p = preset("batch-heavy").unwrap().params.clone();
        p.layer_width_range = (1, 1);
        let t = generate_trace(&p, 4).unwrap();
        for pipeline in &t.pipelines {
            for (i, op) in pipeline.ops.iter().enumerate().skip(1) {
                assert_eq!(op.deps, vec![pipeline.ops[i - 1].op_id]);
            }
            let total: u64 = pipeline.ops.iter().map(|o| o.duration).sum();
            assert_eq!(pipeline.critical_path().unwrap(), total);
        }
    }
}
