//! The generate-and-verify loop: ask a provider for a policy, validate and
//! simulate it on every trace, feed the result back, keep the best.

mod context;
mod evaluate;
mod prompts;
mod run;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{CompletionResult, ExtractionError, GenerationParams, ProviderConfig, ProviderError};
use crate::policy::{ErrorKind, InterpError};
use crate::sim::{SimConfig, SimMetrics, Tick};
use crate::workload::Trace;

pub use context::{build_initial_context, compress_context, Context, ContextEntry, EntryOutcome, EntryRole};
pub use evaluate::{evaluate_baseline, evaluate_policy, median, snippet, synthesize_feedback, Evaluation};
pub use prompts::{system_prompt, user_prompt};
pub use run::{run_discovery, DiscoveryOutcome, RunManifest, TraceId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMetric {
    Throughput,
    P99Latency,
}

impl TargetMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetMetric::Throughput => "throughput",
            TargetMetric::P99Latency => "p99_latency",
        }
    }

    /// Per-trace value. A trace without completions has no p99; it scores
    /// `max_ticks` so that it ranks below any trace that completed something.
    pub fn value(self, m: &SimMetrics, max_ticks: Tick) -> f64 {
        match self {
            TargetMetric::Throughput => m.throughput,
            TargetMetric::P99Latency => m.p99_latency.unwrap_or(max_ticks) as f64,
        }
    }

    /// Strictly better.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            TargetMetric::Throughput => a > b,
            TargetMetric::P99Latency => a < b,
        }
    }

    /// How many times better `best` is than `baseline`; none when the ratio has a zero denominator.
    pub fn improvement(self, best: f64, baseline: f64) -> Option<f64> {
        let (num, den) = match self {
            TargetMetric::Throughput => (best, baseline),
            TargetMetric::P99Latency => (baseline, best),
        };
        (den != 0.0).then(|| num / den)
    }
}

impl fmt::Display for TargetMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TargetMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "throughput" => Ok(TargetMetric::Throughput),
            "p99_latency" | "p99" => Ok(TargetMetric::P99Latency),
            _ => Err(format!(
                "unknown target metric `{s}` (expected throughput or p99_latency)"
            )),
        }
    }
}

/// Why a policy was rejected. Extends [`InterpError`] with where in the
/// evaluation it happened.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalError {
    /// parse, static, runtime, budget, extraction or simulation.
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<u32>,
    #[serde(default)]
    pub hint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tick: Option<Tick>,
}

impl EvalError {
    pub fn simulation(message: impl Into<String>) -> Self {
        EvalError {
            kind: "simulation".into(),
            message: message.into(),
            line: None,
            column: None,
            hint: String::new(),
            trace_index: None,
            tick: None,
        }
    }

    pub fn on_trace(mut self, trace_index: usize) -> Self {
        self.trace_index = Some(trace_index);
        self
    }

    pub fn at_tick(mut self, tick: Tick) -> Self {
        self.tick = Some(tick);
        self
    }
}

impl From<InterpError> for EvalError {
    fn from(e: InterpError) -> Self {
        EvalError {
            kind: e.kind.to_string(),
            message: e.message,
            line: e.line,
            column: e.column,
            hint: e.hint,
            trace_index: None,
            tick: None,
        }
    }
}

impl From<ExtractionError> for EvalError {
    fn from(e: ExtractionError) -> Self {
        EvalError {
            kind: "extraction".into(),
            message: e.message,
            hint: ExtractionError::HINT.into(),
            ..EvalError::simulation("")
        }
    }
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error", self.kind)?;
        if let Some(t) = self.trace_index {
            write!(f, " on trace {t}")?;
        }
        if let Some(t) = self.tick {
            write!(f, " at tick {t}")?;
        }
        if let (Some(line), Some(column)) = (self.line, self.column) {
            write!(f, " at line {line}, column {column}")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl EvalError {
    /// Kind as an interpreter error kind, when it is one.
    pub fn interp_kind(&self) -> Option<ErrorKind> {
        match self.kind.as_str() {
            "parse" => Some(ErrorKind::Parse),
            "static" => Some(ErrorKind::Static),
            "runtime" => Some(ErrorKind::Runtime),
            "budget" => Some(ErrorKind::Budget),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based.
    pub iteration: usize,
    pub policy_source: String,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_trace_metrics: Option<Vec<SimMetrics>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub violation_counts: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<EvalError>,
    pub feedback_text: String,
}

impl IterationRecord {
    pub fn from_result(iteration: usize, policy_source: String, result: Result<Evaluation, EvalError>) -> Self {
        let mut record = IterationRecord {
            iteration,
            policy_source,
            valid: false,
            per_trace_metrics: None,
            score: None,
            violation_counts: BTreeMap::new(),
            error: None,
            feedback_text: String::new(),
        };
        match result {
            Ok(e) => {
                record.valid = true;
                record.score = Some(e.score);
                record.per_trace_metrics = Some(e.per_trace_metrics);
                record.violation_counts = e.violation_counts;
            }
            Err(e) => record.error = Some(e),
        }
        record
    }

    pub fn outcome(&self) -> EntryOutcome {
        EntryOutcome {
            valid: self.valid,
            score: self.score,
            error_kind: self.error.as_ref().map(|e| e.kind.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestPolicy {
    pub policy_source: String,
    pub score: f64,
    pub iteration: usize,
    /// Best over FIFO (throughput) or FIFO over best (p99); none if the denominator is zero.
    pub improvement_vs_baseline: Option<f64>,
}

/// Extremum over valid records, earliest iteration on ties.
pub fn select_best(records: &[IterationRecord], target: TargetMetric, baseline: Option<f64>) -> Option<BestPolicy> {
    let mut best: Option<&IterationRecord> = None;
    for r in records.iter().filter(|r| r.valid) {
        let (Some(score), current) = (r.score, best.and_then(|b| b.score)) else {
            continue;
        };
        if current.is_none_or(|c| target.better(score, c)) {
            best = Some(r);
        }
    }
    best.map(|r| {
        let score = r.score.expect("valid record has a score");
        BestPolicy {
            policy_source: r.policy_source.clone(),
            score,
            iteration: r.iteration,
            improvement_vs_baseline: baseline.and_then(|b| target.improvement(score, b)),
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub iteration: usize,
    pub tokens_in: u64,
    pub tokens_out: u64,
    pub cost_usd: f64,
    pub latency_seconds: f64,
    pub estimated: bool,
}

/// Cost and time of the provider calls. Time is the sum of call latencies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub total_cost_usd: f64,
    pub total_time_seconds: f64,
    pub total_tokens_in: u64,
    pub total_tokens_out: u64,
    pub entries: Vec<LedgerEntry>,
}

impl RunLedger {
    pub fn record(&mut self, iteration: usize, result: &CompletionResult) {
        self.entries.push(LedgerEntry {
            iteration,
            tokens_in: result.tokens_in,
            tokens_out: result.tokens_out,
            cost_usd: result.cost_usd,
            latency_seconds: result.latency_seconds,
            estimated: result.estimated,
        });
        self.total_cost_usd += result.cost_usd;
        self.total_time_seconds += result.latency_seconds;
        self.total_tokens_in += result.tokens_in;
        self.total_tokens_out += result.tokens_out;
    }
}

#[derive(Clone, Debug)]
pub struct DiscoveryConfig {
    pub run_id: String,
    pub iterations: usize,
    pub target_metric: TargetMetric,
    pub token_budget: u64,
    pub traces: Vec<Trace>,
    pub sim_config: SimConfig,
    pub provider: ProviderConfig,
    pub generation: GenerationParams,
    pub max_steps: u64,
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<(), DiscoveryError> {
        if self.iterations == 0 {
            return Err(DiscoveryError::Config("iterations must be >= 1".into()));
        }
        if self.traces.is_empty() {
            return Err(DiscoveryError::Config("at least one trace is required".into()));
        }
        self.sim_config
            .validate()
            .map_err(|e| DiscoveryError::Config(e.to_string()))?;
        let initial = build_initial_context(self.target_metric).tokens();
        if self.token_budget < initial {
            return Err(DiscoveryError::Config(format!(
                "token_budget {} is smaller than the initial context ({initial} tokens)",
                self.token_budget
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DiscoveryError {
    #[error("invalid discovery config: {0}")]
    Config(String),
    #[error("context needs {needed} tokens verbatim but the budget is {budget}")]
    BudgetImpossible { needed: u64, budget: u64 },
    #[error("{error} (stopped after {completed} iterations)")]
    Provider { error: ProviderError, completed: usize },
    #[error("baseline evaluation failed: {0}")]
    Baseline(EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
