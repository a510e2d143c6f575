use std::fs;
use std::path::{Path, PathBuf};

use schedforge::workload::{
    generate_trace, preset, read_trace_file, trace_name, write_trace_file, Trace, WorkloadParams, CANONICAL_SEEDS,
    PRESETS,
};

use crate::error::CliError;

pub const TRACE_EXT: &str = ".trace.jsonl";

/// A trace with the name it is reported under.
#[derive(Clone, Debug)]
pub struct NamedTrace {
    pub name: String,
    pub trace: Trace,
}

fn preset_list() -> String {
    let mut names: Vec<&str> = PRESETS.iter().map(|p| p.name).collect();
    names.push("canonical");
    names.join(", ")
}

fn unknown_preset(name: &str) -> CliError {
    CliError::input(format!("unknown preset `{name}`; available presets: {}", preset_list()))
}

/// Traces for a preset name. `canonical` is every preset with both canonical
/// seeds; a single preset uses `seeds`, or the canonical seeds when empty.
pub fn preset_traces(name: &str, seeds: &[u64]) -> Result<Vec<NamedTrace>, CliError> {
    let seeds = if seeds.is_empty() { &CANONICAL_SEEDS[..] } else { seeds };
    let chosen: Vec<_> = if name == "canonical" {
        if seeds != CANONICAL_SEEDS {
            return Err(CliError::input("the canonical suite has fixed seeds; drop --seed"));
        }
        PRESETS.iter().collect()
    } else {
        vec![preset(name).ok_or_else(|| unknown_preset(name))?]
    };
    let mut out = Vec::new();
    for p in chosen {
        for &seed in seeds {
            let trace = generate_trace(&p.params, seed).map_err(|e| CliError::input(e.to_string()))?;
            out.push(NamedTrace {
                name: trace_name(p.name, seed),
                trace,
            });
        }
    }
    Ok(out)
}

pub fn params_traces(path: &Path, seeds: &[u64]) -> Result<Vec<NamedTrace>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let params: WorkloadParams =
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("custom")
        .to_string();
    let seeds = if seeds.is_empty() { &CANONICAL_SEEDS[..] } else { seeds };
    seeds
        .iter()
        .map(|&seed| {
            let trace = generate_trace(&params, seed).map_err(|e| CliError::input(e.to_string()))?;
            Ok(NamedTrace {
                name: trace_name(&stem, seed),
                trace,
            })
        })
        .collect()
}

/// Every `*.trace.jsonl` in `dir`, by file name.
pub fn read_trace_dir(dir: &Path) -> Result<Vec<NamedTrace>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::input(format!("traces directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(TRACE_EXT))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::input(format!("no {TRACE_EXT} files in {}", dir.display())));
    }
    files
        .iter()
        .map(|path| {
            let trace = read_trace_file(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
            let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            let name = file_name.trim_end_matches(TRACE_EXT).to_string();
            Ok(NamedTrace { name, trace })
        })
        .collect()
}

/// `--traces` value: an existing directory, `canonical`, or a preset name.
pub fn resolve_traces(spec: &str, base: &Path) -> Result<Vec<NamedTrace>, CliError> {
    let dir = base.join(spec);
    if dir.is_dir() {
        return read_trace_dir(&dir);
    }
    if spec == "canonical" || preset(spec).is_some() {
        return preset_traces(spec, &[]);
    }
    Err(CliError::input(format!(
        "traces `{spec}` is neither a directory nor a preset ({})",
        preset_list()
    )))
}

/// Writes `<name>.trace.jsonl` files; returns their paths.
pub fn write_traces(traces: &[NamedTrace], out: &Path) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out.display(), e))?;
    traces
        .iter()
        .map(|t| {
            let path = out.join(format!("{}{TRACE_EXT}", t.name));
            write_trace_file(&t.trace, &path).map_err(|e| CliError {
                code: crate::error::EXIT_IO,
                message: format!("{}: {e}", path.display()),
            })?;
            Ok(path)
        })
        .collect()
}
