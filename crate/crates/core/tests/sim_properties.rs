use proptest::prelude::*;

use schedforge::policy::NativeFifo;
use schedforge::sim::{
    compute_metrics, init_sim, nearest_rank, CompletionRecord, Outcome, PipelineStatus, RandomPolicy, SimConfig,
    Simulator, ViolationKind,
};
use schedforge::workload::{fuzz_params, generate_trace};

fn conservation_holds(sim: &Simulator<'_>) -> bool {
    let (mut in_flight, mut done) = (0, 0);
    for status in sim.state().pipeline_status.values() {
        match status {
            PipelineStatus::InFlight => in_flight += 1,
            PipelineStatus::Completed | PipelineStatus::Failed => done += 1,
        }
    }
    in_flight + done == sim.arrived()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fifo_conserves_pipelines(seed in any::<u64>()) {
        let trace = generate_trace(&fuzz_params(seed), seed).unwrap();
        let mut sim = init_sim(&trace.pipelines, SimConfig::default()).unwrap();
        let mut fifo = NativeFifo::new();
        while !sim.is_done() {
            sim.step(&mut fifo).unwrap();
            prop_assert!(conservation_holds(&sim));
        }
        let out = sim.finish();
        prop_assert_eq!(out.metrics.completed + out.metrics.failed + out.metrics.unfinished, trace.pipelines.len());
        prop_assert!(out.violation_log.iter().all(|v| !v.kind.is_rejection()));
    }

    #[test]
    fn random_decisions_never_oversubscribe(seed in any::<u64>()) {
        let trace = generate_trace(&fuzz_params(seed), seed).unwrap();
        let cfg = SimConfig {
        max_ticks: 1500,
        ..SimConfig::default()
    };
        let mut sim = init_sim(&trace.pipelines, cfg.clone()).unwrap();
        let mut policy = RandomPolicy::new(seed);
        while !sim.is_done() {
            sim.step(&mut policy).unwrap();
            for (usage, pool) in sim.state().pool_usage.iter().zip(&cfg.pools) {
                prop_assert!(usage.cpu_used <= pool.cpu_capacity);
                prop_assert!(usage.mem_used <= pool.mem_capacity);
            }
            prop_assert!(conservation_holds(&sim));
        }
        let state = sim.state();
        let rejections = state.violation_log.iter().filter(|v| v.kind.is_rejection()).count();
        let accepted = state.assignment_log.len() + state.suspension_log.len();
        prop_assert_eq!(accepted + rejections, policy.emitted_assignments + policy.emitted_suspensions);
    }

    #[test]
    fn percentiles_match_sort_and_index(latencies in prop::collection::vec(0u64..10_000, 1..500)) {
        let log: Vec<CompletionRecord> = latencies
            .iter()
            .enumerate()
            .map(|(i, &l)| CompletionRecord {
                pipeline_id: i as u64,
                arrival_tick: 5,
                terminal_tick: 5 + l,
                outcome: Outcome::Completed,
                latency: Some(l),
            })
            .collect();
        let m = compute_metrics(&log, &[], 1000);
        let mut sorted = latencies.clone();
        sorted.sort_unstable();
        let n = sorted.len();
        // rank = ceil(q * n / 100), 1-indexed
        let p99 = sorted[(99 * n).div_ceil(100) - 1];
        let p50 = sorted[(50 * n).div_ceil(100) - 1];
        prop_assert_eq!(m.p99_latency, Some(p99));
        prop_assert_eq!(m.median_latency, Some(p50));
        prop_assert_eq!(nearest_rank(&sorted, 99), Some(p99));
    }
}

#[test]
fn percentile_edge_cases() {
    assert_eq!(nearest_rank(&[], 99), None);
    assert_eq!(nearest_rank(&[7], 99), Some(7));
    let hundred: Vec<u64> = (1..=100).collect();
    assert_eq!(nearest_rank(&hundred, 99), Some(99));
    assert_eq!(nearest_rank(&hundred, 50), Some(50));
    let hundred_one: Vec<u64> = (1..=101).collect();
    assert_eq!(nearest_rank(&hundred_one, 99), Some(100));
}

#[test]
fn failed_pipelines_do_not_count_towards_latency() {
    let log = vec![
        CompletionRecord {
            pipeline_id: 0,
            arrival_tick: 0,
            terminal_tick: 10,
            outcome: Outcome::Completed,
            latency: Some(10),
        },
        CompletionRecord {
            pipeline_id: 1,
            arrival_tick: 0,
            terminal_tick: 3,
            outcome: Outcome::Failed,
            latency: None,
        },
    ];
    let m = compute_metrics(&log, &[], 500);
    assert_eq!((m.completed, m.failed, m.violations), (1, 1, 0));
    assert_eq!(m.p99_latency, Some(10));
    assert_eq!(m.throughput, 2.0);
}

#[test]
fn fuzz_violation_kinds_cover_the_rejection_paths() {
    let trace = generate_trace(&fuzz_params(11), 11).unwrap();
    let cfg = SimConfig {
        max_ticks: 2000,
        ..SimConfig::default()
    };
    let mut sim = init_sim(&trace.pipelines, cfg).unwrap();
    let mut policy = RandomPolicy::new(3);
    while !sim.is_done() {
        sim.step(&mut policy).unwrap();
    }
    let kinds: std::collections::BTreeSet<ViolationKind> = sim.state().violation_log.iter().map(|v| v.kind).collect();
    for k in [
        ViolationKind::UnknownOp,
        ViolationKind::UnknownPool,
        ViolationKind::NotReady,
        ViolationKind::DuplicateAssignment,
    ] {
        assert!(kinds.contains(&k), "{k:?} never produced: {kinds:?}");
    }
}
