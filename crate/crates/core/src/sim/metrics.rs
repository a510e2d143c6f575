use serde::{Deserialize, Serialize};

use super::types::{CompletionRecord, Outcome, Tick, ViolationEvent};

/// End-of-run scorecard.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Completed pipelines per 1000 ticks.
    pub throughput: f64,
    pub p99_latency: Option<Tick>,
    pub median_latency: Option<Tick>,
    pub completed: usize,
    pub failed: usize,
    pub unfinished: usize,
    pub violations: usize,
    pub elapsed_ticks: Tick,
}

/// Nearest-rank percentile over an ascending slice: the element at 1-indexed
/// rank `ceil(q/100 * n)`, computed in integer arithmetic.
pub fn nearest_rank(sorted: &[Tick], q: u32) -> Option<Tick> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len() as u64;
    let rank = (u64::from(q) * n).div_ceil(100).clamp(1, n);
    Some(sorted[(rank - 1) as usize])
}

pub fn compute_metrics(
    completion_log: &[CompletionRecord],
    violation_log: &[ViolationEvent],
    elapsed_ticks: Tick,
) -> SimMetrics {
    let mut latencies = Vec::new();
    let (mut completed, mut failed, mut unfinished) = (0, 0, 0);
    for record in completion_log {
        match record.outcome {
            Outcome::Completed => {
                completed += 1;
                latencies.push(record.latency.unwrap_or(record.terminal_tick - record.arrival_tick));
            }
            Outcome::Failed => failed += 1,
            Outcome::Unfinished => unfinished += 1,
        }
    }
    latencies.sort_unstable();
    let throughput = if elapsed_ticks == 0 {
        0.0
    } else {
        completed as f64 / elapsed_ticks as f64 * 1000.0
    };
    SimMetrics {
        throughput,
        p99_latency: nearest_rank(&latencies, 99),
        median_latency: nearest_rank(&latencies, 50),
        completed,
        failed,
        unfinished,
        violations: violation_log.len(),
        elapsed_ticks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::types::PipelineId;

    fn done(id: PipelineId, latency: Tick) -> CompletionRecord {
        CompletionRecord {
            pipeline_id: id,
            arrival_tick: 0,
            terminal_tick: latency,
            outcome: Outcome::Completed,
            latency: Some(latency),
        }
    }

    fn failed(id: PipelineId) -> CompletionRecord {
        CompletionRecord {
            pipeline_id: id,
            arrival_tick: 0,
            terminal_tick: 5,
            outcome: Outcome::Failed,
            latency: None,
        }
    }

    #[test]
    fn single_completion() {
        let m = compute_metrics(&[done(0, 10)], &[], 100);
        assert_eq!(m.throughput, 10.0);
        assert_eq!(m.p99_latency, Some(10));
        assert_eq!(m.median_latency, Some(10));
        assert_eq!(m.completed, 1);
    }

    #[test]
    fn one_to_hundred() {
        let log: Vec<_> = (1..=100).map(|i| done(i, i)).collect();
        let m = compute_metrics(&log, &[], 1000);
        assert_eq!(m.p99_latency, Some(99));
        assert_eq!(m.median_latency, Some(50));
        assert_eq!(m.throughput, 100.0);
    }

    #[test]
    fn only_failures() {
        let log = vec![failed(0), failed(1), failed(2)];
        let m = compute_metrics(&log, &[], 50);
        assert_eq!(m.throughput, 0.0);
        assert_eq!(m.failed, 3);
        assert_eq!(m.p99_latency, None);
        assert_eq!(m.median_latency, None);
    }

    #[test]
    fn empty_log() {
        let m = compute_metrics(&[], &[], 0);
        assert_eq!(m.throughput, 0.0);
        assert_eq!(m.completed + m.failed + m.unfinished, 0);
    }

    #[test]
    fn rank_rounds_up() {
        // n = 3: p99 rank = ceil(2.97) = 3, median rank = ceil(1.5) = 2
        assert_eq!(nearest_rank(&[4, 7, 9], 99), Some(9));
        assert_eq!(nearest_rank(&[4, 7, 9], 50), Some(7));
        // n = 2: median rank = 1
        assert_eq!(nearest_rank(&[4, 7], 50), Some(4));
    }
}
