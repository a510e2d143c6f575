use proptest::prelude::*;

use schedforge::policy::NativeFifo;
use schedforge::policy::{parse, PolicyInstance, PolicyProgram, DEFAULT_MAX_STEPS};
use schedforge::sim::{run, SimConfig};
use schedforge::workload::{fuzz_params, generate_trace};

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "queue", "op", "pool_id", "state"]).prop_map(str::to_string)
}

fn leaf() -> impl Strategy<Value = String> {
    prop_oneof![
        (0u32..1000).prop_map(|n| n.to_string()),
        (0u32..100).prop_map(|n| format!("{n}.5")),
        prop::sample::select(vec!["\"batch\"", "\"a b\"", "\"\""]).prop_map(str::to_string),
        prop::bool::ANY.prop_map(|b| b.to_string()),
        ident(),
    ]
}

fn expr() -> impl Strategy<Value = String> {
    leaf().prop_recursive(4, 32, 4, |inner| {
        let op = prop::sample::select(vec![
            "+", "-", "*", "/", "%", "==", "!=", "<", "<=", ">", ">=", "and", "or",
        ]);
        prop_oneof![
            (inner.clone(), op, inner.clone()).prop_map(|(l, o, r)| format!("({l} {o} {r})")),
            inner.clone().prop_map(|e| format!("(-{e})")),
            inner.clone().prop_map(|e| format!("(not {e})")),
            (inner.clone(), ident()).prop_map(|(e, f)| format!("({e}).{f}")),
            (inner.clone(), inner.clone()).prop_map(|(e, i)| format!("({e})[{i}]")),
            prop::collection::vec(inner.clone(), 0..3).prop_map(|v| format!("[{}]", v.join(", "))),
            prop::collection::vec((ident(), inner.clone()), 0..3).prop_map(|v| {
                let fields: Vec<String> = v.into_iter().map(|(k, e)| format!("{k}: {e}")).collect();
                format!("{{{}}}", fields.join(", "))
            }),
            (
                prop::sample::select(vec!["len", "min", "max", "range"]),
                prop::collection::vec(inner, 0..3)
            )
                .prop_map(|(f, args)| format!("{f}({})", args.join(", "))),
        ]
    })
}

fn stmt() -> impl Strategy<Value = String> {
    let simple = prop_oneof![
        (ident(), expr()).prop_map(|(n, e)| format!("let {n} = {e};")),
        (ident(), ident(), expr()).prop_map(|(n, f, e)| format!("{n}.{f} = {e};")),
        (expr(), expr()).prop_map(|(o, p)| format!("assign({o}, {p});")),
    ];
    simple.prop_recursive(3, 12, 3, |inner| {
        let block = prop::collection::vec(inner, 0..3).prop_map(|v| format!("{{\n{}\n}}", v.join("\n")));
        prop_oneof![
            (expr(), block.clone()).prop_map(|(c, b)| format!("if {c} {b}")),
            (expr(), block.clone(), block.clone()).prop_map(|(c, b, e)| format!("if {c} {b} else {e}")),
            (ident(), expr(), block).prop_map(|(v, e, b)| format!("for {v} in {e} {b}")),
        ]
    })
}

fn program() -> impl Strategy<Value = String> {
    (prop::collection::vec(stmt(), 0..4), prop::collection::vec(stmt(), 0..6)).prop_map(|(i, s)| {
        format!(
            "init {{\n{}\n}}\nschedule(failures, pipelines) {{\n{}\n}}\n",
            i.join("\n"),
            s.join("\n")
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn pretty_print_reparses_to_the_same_ast(src in program()) {
        let first = parse(&src).unwrap();
        let printed = first.pretty();
        let second = parse(&printed).unwrap();
        prop_assert_eq!(&first.ast, &second.ast, "printed:\n{}", printed);
        prop_assert_eq!(second.pretty(), printed);
    }

    #[test]
    fn dsl_fifo_matches_native_fifo(seed in any::<u64>()) {
        let trace = generate_trace(&fuzz_params(seed), seed).unwrap();
        let cfg = SimConfig::default();
        let program = std::sync::Arc::new(PolicyProgram::fifo());
        let mut dsl = PolicyInstance::new(program, DEFAULT_MAX_STEPS).unwrap();
        let a = run(&trace.pipelines, &mut dsl, &cfg).unwrap();
        let b = run(&trace.pipelines, &mut NativeFifo::new(), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn shipped_policies_survive_pretty_printing() {
    let sjf = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/../../fixtures/policies/sjf_preempt.pol"
    ))
    .unwrap();
    for src in [schedforge::policy::FIFO_SOURCE, sjf.as_str()] {
        let p = PolicyProgram::load(src).unwrap();
        let again = PolicyProgram::load(&p.pretty()).unwrap();
        assert_eq!(p.ast, again.ast);
    }
}
