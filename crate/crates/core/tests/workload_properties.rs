use proptest::prelude::*;

use schedforge::sim::{init_sim, SimConfig, WorkloadClass};
use schedforge::workload::{
    canonical_suite, export_trace, fuzz_params, generate_trace, import_trace, preset, CANONICAL_SEEDS, PRESETS,
};

#[test]
fn same_seed_same_trace() {
    let p = &preset("heavy-tailed").unwrap().params;
    assert_eq!(generate_trace(p, 9).unwrap(), generate_trace(p, 9).unwrap());
}

#[test]
fn seeds_change_arrivals_not_fingerprint() {
    let p = &preset("interactive-heavy").unwrap().params;
    let (a, b) = (generate_trace(p, 1).unwrap(), generate_trace(p, 2).unwrap());
    assert_eq!(a.params_fingerprint, b.params_fingerprint);
    let arrivals = |t: &schedforge::workload::Trace| t.pipelines.iter().map(|p| p.arrival_tick).collect::<Vec<_>>();
    assert_ne!(arrivals(&a), arrivals(&b));
}

#[test]
fn tiny_rate_gives_empty_trace() {
    let mut p = preset("batch-heavy").unwrap().params.clone();
    p.arrival_rate = 1e-12;
    p.horizon = 1000;
    assert!(generate_trace(&p, 42).unwrap().pipelines.is_empty());
}

#[test]
fn canonical_suite_shape() {
    let suite = canonical_suite();
    assert_eq!(suite.len(), 6);
    assert_eq!(suite, canonical_suite());
    for (i, pair) in suite.chunks(2).enumerate() {
        assert_eq!(pair[0].params_fingerprint, pair[1].params_fingerprint);
        assert_eq!(pair[0].params_fingerprint, PRESETS[i].params.fingerprint());
        assert_eq!([pair[0].seed, pair[1].seed], CANONICAL_SEEDS);
    }
    assert_ne!(suite[0].params_fingerprint, suite[2].params_fingerprint);
    for t in &suite {
        assert!(!t.pipelines.is_empty());
        let sim = init_sim(&t.pipelines, SimConfig::default()).unwrap();
        assert_eq!(sim.state().clock, 0);
    }
}

#[test]
fn canonical_suite_round_trips() {
    for t in canonical_suite() {
        let mut buf = Vec::new();
        export_trace(&t, &mut buf).unwrap();
        assert_eq!(import_trace(buf.as_slice()).unwrap(), t);
    }
}

#[test]
fn interactive_fraction_is_respected() {
    for preset in PRESETS.iter() {
        let mut p = preset.params.clone();
        p.horizon = 20_000;
        let t = generate_trace(&p, 5).unwrap();
        assert!(t.pipelines.len() >= 1000, "{}: {}", preset.name, t.pipelines.len());
        let frac = t.interactive_fraction();
        assert!((frac - p.interactive_fraction).abs() <= 0.05, "{}: {frac}", preset.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_traces_are_valid(seed in any::<u64>()) {
        let p = fuzz_params(seed);
        let t = generate_trace(&p, seed).unwrap();
        t.validate().unwrap();
        let mut last = 0;
        let mut next_op = 0;
        for (i, pipeline) in t.pipelines.iter().enumerate() {
            prop_assert_eq!(pipeline.pipeline_id, i as u64);
            prop_assert!(pipeline.arrival_tick >= last && pipeline.arrival_tick <= p.horizon);
            prop_assert!(pipeline.arrival_tick >= 1);
            last = pipeline.arrival_tick;
            let n = pipeline.ops.len() as u32;
            prop_assert!(p.ops_range.0 <= n && n <= p.ops_range.1);
            let critical = pipeline.critical_path().unwrap();
            prop_assert!(pipeline.timeout >= critical);
            prop_assert_eq!(pipeline.timeout, (p.timeout_factor * critical as f64).ceil() as u64);
            let class = match pipeline.workload_class {
                WorkloadClass::Interactive => &p.interactive,
                WorkloadClass::Batch => &p.batch,
            };
            for op in &pipeline.ops {
                prop_assert_eq!(op.op_id, next_op);
                next_op += 1;
                prop_assert!(op.duration >= 1);
                prop_assert!(class.cpu_range.0 <= op.cpu_req && op.cpu_req <= class.cpu_range.1);
                prop_assert!(class.mem_range.0 <= op.mem_req && op.mem_req <= class.mem_range.1);
                prop_assert!(op.deps.iter().all(|&d| d < op.op_id));
            }
            // every op outside the first layer has a parent
            let roots = pipeline.ops.iter().filter(|o| o.deps.is_empty()).count() as u32;
            prop_assert!(roots >= 1 && roots <= p.layer_width_range.1);
        }
    }
}
