use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{EvalError, IterationRecord, TargetMetric};
use crate::policy::{NativeFifo, PolicyInstance, PolicyProgram};
use crate::sim::{run, Policy, SimConfig, SimError, SimMetrics};
use crate::workload::Trace;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub per_trace_metrics: Vec<SimMetrics>,
    /// Violation counts by kind, summed over all traces.
    pub violation_counts: BTreeMap<String, usize>,
    pub score: f64,
}

/// Median; mean of the middle two for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

fn score_of(metrics: &[SimMetrics], target: TargetMetric, sim_config: &SimConfig) -> f64 {
    let values: Vec<f64> = metrics.iter().map(|m| target.value(m, sim_config.max_ticks)).collect();
    median(&values).unwrap_or(0.0)
}

fn evaluate_with<P: Policy>(
    traces: &[Trace],
    sim_config: &SimConfig,
    target: TargetMetric,
    mut make: impl FnMut() -> Result<P, EvalError>,
) -> Result<Evaluation, EvalError> {
    let mut per_trace_metrics = Vec::with_capacity(traces.len());
    let mut violation_counts = BTreeMap::new();
    for (trace_index, trace) in traces.iter().enumerate() {
        let mut policy = make().map_err(|e| e.on_trace(trace_index))?;
        let out = run(&trace.pipelines, &mut policy, sim_config).map_err(|e| match e {
            SimError::PolicyRuntime { tick, error } => EvalError::from(error).on_trace(trace_index).at_tick(tick),
            other => EvalError::simulation(other.to_string()).on_trace(trace_index),
        })?;
        for v in &out.violation_log {
            *violation_counts.entry(v.kind.as_str().to_string()).or_insert(0) += 1;
        }
        per_trace_metrics.push(out.metrics);
    }
    let score = score_of(&per_trace_metrics, target, sim_config);
    Ok(Evaluation {
        per_trace_metrics,
        violation_counts,
        score,
    })
}

/// Parses and validates once, then runs every trace with a fresh policy state.
pub fn evaluate_policy(
    source: &str,
    traces: &[Trace],
    sim_config: &SimConfig,
    target: TargetMetric,
    max_steps: u64,
) -> Result<Evaluation, EvalError> {
    let program = Arc::new(PolicyProgram::load(source)?);
    evaluate_with(traces, sim_config, target, || {
        Ok(PolicyInstance::new(program.clone(), max_steps)?)
    })
}

/// The native FIFO on the same traces; the reference for improvement ratios.
pub fn evaluate_baseline(
    traces: &[Trace],
    sim_config: &SimConfig,
    target: TargetMetric,
) -> Result<Evaluation, EvalError> {
    evaluate_with(traces, sim_config, target, || Ok(NativeFifo::new()))
}

/// Lines `line - 2 ..= line + 2` with the offending one marked.
pub fn snippet(source: &str, line: u32) -> String {
    let line = line as usize;
    let mut out = String::new();
    for (i, text) in source.lines().enumerate() {
        let n = i + 1;
        if n + 2 >= line && n <= line + 2 {
            let marker = if n == line { ">" } else { " " };
            let _ = writeln!(out, "{marker} {n:>4} | {text}");
        }
    }
    out
}

fn fmt_opt(v: Option<u64>) -> String {
    v.map_or("-".to_string(), |v| v.to_string())
}

/// `+x (better)` / `-x (worse)`, signed so positive always means improvement.
fn delta(target: TargetMetric, score: f64, reference: f64) -> String {
    let gain = match target {
        TargetMetric::Throughput => score - reference,
        TargetMetric::P99Latency => reference - score,
    };
    let verdict = if gain > 0.0 {
        "better"
    } else if gain < 0.0 {
        "worse"
    } else {
        "equal"
    };
    format!("{gain:+.3} ({verdict})")
}

pub fn synthesize_feedback(
    record: &IterationRecord,
    best_so_far: Option<f64>,
    baseline: Option<f64>,
    target: TargetMetric,
) -> String {
    let mut s = String::new();
    if let Some(err) = &record.error {
        let _ = writeln!(s, "Iteration {}: the policy is invalid.", record.iteration);
        let _ = writeln!(s, "{err}");
        if let Some(line) = err.line {
            let snip = snippet(&record.policy_source, line);
            if !snip.is_empty() {
                s.push_str(&snip);
            }
        }
        if !err.hint.is_empty() {
            let _ = writeln!(s, "hint: {}", err.hint);
        }
        s.push_str("Fix the problem and reply with the complete policy in a fenced code block.\n");
        return s;
    }

    let metrics = record.per_trace_metrics.as_deref().unwrap_or_default();
    let score = record.score.unwrap_or_default();
    let _ = writeln!(s, "Iteration {}: the policy is valid.", record.iteration);
    let _ = writeln!(
        s,
        "Median {} across {} traces: {score:.3} ({} is better)",
        target.as_str(),
        metrics.len(),
        match target {
            TargetMetric::Throughput => "higher",
            TargetMetric::P99Latency => "lower",
        }
    );
    match best_so_far {
        Some(best) => {
            let _ = writeln!(s, "vs best so far ({best:.3}): {}", delta(target, score, best));
        }
        None => s.push_str("vs best so far: this is the first valid policy\n"),
    }
    if let Some(base) = baseline {
        let _ = writeln!(s, "vs FIFO baseline ({base:.3}): {}", delta(target, score, base));
    }
    s.push_str("trace | throughput | p99 latency | completed | failed | violations\n");
    for (i, m) in metrics.iter().enumerate() {
        let _ = writeln!(
            s,
            "{i} | {:.3} | {} | {} | {} | {}",
            m.throughput,
            fmt_opt(m.p99_latency),
            m.completed,
            m.failed,
            m.violations
        );
    }
    let mut kinds: Vec<(&String, &usize)> = record.violation_counts.iter().collect();
    kinds.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    if kinds.is_empty() {
        s.push_str("No violations.\n");
    } else {
        let top: Vec<String> = kinds.iter().take(3).map(|(k, n)| format!("{k} x{n}")).collect();
        let _ = writeln!(s, "Top violation kinds: {}", top.join(", "));
    }
    s.push_str("Propose an improved policy as one fenced code block.\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{generate_trace, preset};

    fn small_traces(n: usize) -> Vec<Trace> {
        let mut p = preset("heavy-tailed").unwrap().params.clone();
        p.horizon = 150;
        (0..n).map(|s| generate_trace(&p, s as u64 + 1).unwrap()).collect()
    }

    #[test]
    fn median_rule() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[4.0]), Some(4.0));
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[6.0, 1.0, 4.0, 3.0, 10.0, 2.0]), Some(3.5));
    }

    #[test]
    fn dsl_fifo_scores_like_the_baseline() {
        let traces = small_traces(4);
        let cfg = SimConfig::default();
        let dsl = evaluate_policy(
            crate::policy::FIFO_SOURCE,
            &traces,
            &cfg,
            TargetMetric::Throughput,
            200_000,
        )
        .unwrap();
        let native = evaluate_baseline(&traces, &cfg, TargetMetric::Throughput).unwrap();
        assert_eq!(dsl, native);
        let mut t: Vec<f64> = native.per_trace_metrics.iter().map(|m| m.throughput).collect();
        t.sort_by(f64::total_cmp);
        assert_eq!(native.score, (t[1] + t[2]) / 2.0);
    }

    #[test]
    fn single_trace_score_is_its_metric() {
        let traces = small_traces(1);
        let cfg = SimConfig::default();
        let e = evaluate_baseline(&traces, &cfg, TargetMetric::P99Latency).unwrap();
        assert_eq!(e.score, e.per_trace_metrics[0].p99_latency.unwrap() as f64);
    }

    #[test]
    fn runtime_error_names_the_trace() {
        // fails only once a pipeline with more than 5 ops shows up
        let src = "init { }\nschedule(failures, pipelines) {\n    for p in pipelines {\n        if len(p.ops) > 5 {\n            let x = 1 / 0;\n        }\n    }\n}\n";
        let traces = small_traces(4);
        let first_bad = traces
            .iter()
            .position(|t| t.pipelines.iter().any(|p| p.ops.len() > 5))
            .unwrap();
        let err = evaluate_policy(src, &traces, &SimConfig::default(), TargetMetric::Throughput, 200_000).unwrap_err();
        assert_eq!(err.trace_index, Some(first_bad));
        assert_eq!(err.line, Some(5));
        assert!(err.tick.is_some());
    }

    #[test]
    fn snippet_window() {
        let src = "a\nb\nc\nd\ne\nf\ng\n";
        let s = snippet(src, 4);
        assert_eq!(s.lines().count(), 5);
        assert!(s.contains(">    4 | d"));
        assert_eq!(snippet(src, 1).lines().count(), 3);
    }
}
