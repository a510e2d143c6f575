use super::{generate_trace, ClassParams, LogNormal, Trace, WorkloadParams};

/// Named parameter set of the canonical suite.
pub struct Preset {
    pub name: &'static str,
    pub params: WorkloadParams,
}

/// Two seeds per preset; the canonical suite is every preset crossed with these.
pub const CANONICAL_SEEDS: [u64; 2] = [42, 1337];

/// Preset constants. Durations are ticks, memory is MB; the default
/// [`SimConfig`](crate::sim::SimConfig) has 4 pools of 16 cpu / 64 GB.
///
/// | preset            | rate | horizon | interactive | ops  | width | interactive dur (mu, sigma) cpu mem | batch dur (mu, sigma) cpu mem      | timeout x |
/// |-------------------|------|---------|-------------|------|-------|-------------------------------------|------------------------------------|-----------|
/// | interactive-heavy | 0.60 | 1500    | 0.80        | 1-5  | 1-3   | (1.0, 0.4) 1-2 256-1024             | (3.0, 0.6) 2-6 1024-8192           | 3.0       |
/// | batch-heavy       | 0.15 | 1500    | 0.20        | 2-8  | 1-3   | (1.0, 0.4) 1-2 256-1024             | (3.2, 0.6) 2-8 2048-16384          | 3.0       |
/// | heavy-tailed      | 0.35 | 1500    | 0.50        | 1-6  | 1-3   | (1.0, 0.5) 1-2 256-1024             | (3.0, 1.4) 4-12 2048-16384         | 3.0       |
pub fn presets() -> Vec<Preset> {
    let small = |mu, sigma| ClassParams {
        duration_lognormal: LogNormal { mu, sigma },
        cpu_range: (1, 2),
        mem_range: (256, 1024),
    };
    let big = |mu, sigma, cpu_range, mem_range| ClassParams {
        duration_lognormal: LogNormal { mu, sigma },
        cpu_range,
        mem_range,
    };
    vec![
        Preset {
            name: "interactive-heavy",
            params: WorkloadParams {
                arrival_rate: 0.60,
                horizon: 1500,
                interactive_fraction: 0.80,
                ops_range: (1, 5),
                layer_width_range: (1, 3),
                interactive: small(1.0, 0.4),
                batch: big(3.0, 0.6, (2, 6), (1024, 8192)),
                timeout_factor: 3.0,
            },
        },
        Preset {
            name: "batch-heavy",
            params: WorkloadParams {
                arrival_rate: 0.15,
                horizon: 1500,
                interactive_fraction: 0.20,
                ops_range: (2, 8),
                layer_width_range: (1, 3),
                interactive: small(1.0, 0.4),
                batch: big(3.2, 0.6, (2, 8), (2048, 16384)),
                timeout_factor: 3.0,
            },
        },
        Preset {
            name: "heavy-tailed",
            params: WorkloadParams {
                arrival_rate: 0.35,
                horizon: 1500,
                interactive_fraction: 0.50,
                ops_range: (1, 6),
                layer_width_range: (1, 3),
                interactive: small(1.0, 0.5),
                batch: big(3.0, 1.4, (4, 12), (2048, 16384)),
                timeout_factor: 3.0,
            },
        },
    ]
}

/// The same list as [`presets`], built once.
pub static PRESETS: std::sync::LazyLock<Vec<Preset>> = std::sync::LazyLock::new(presets);

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Six traces: presets in table order, each with [`CANONICAL_SEEDS`] in order.
pub fn canonical_suite() -> Vec<Trace> {
    PRESETS
        .iter()
        .flat_map(|p| CANONICAL_SEEDS.iter().map(move |&seed| (p, seed)))
        .map(|(p, seed)| generate_trace(&p.params, seed).expect("preset params are valid"))
        .collect()
}

/// File stem used for a canonical trace, e.g. `heavy-tailed_seed42`.
pub fn trace_name(preset: &str, seed: u64) -> String {
    format!("{preset}_seed{seed}")
}
