use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_schedforge"))
}

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", stderr(out));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path, overrides: Value) -> PathBuf {
    let mut config = serde_json::json!({
        "run_id": "t",
        "iterations": 5,
        "target_metric": "throughput",
        "token_budget": 60000,
        "traces": "heavy-tailed",
        "provider": {
            "kind": "scripted",
            "script_dir": repo().join("fixtures/scripted_discovery"),
            "price_table": { "input_per_mtok": 3.0, "output_per_mtok": 15.0 }
        }
    });
    for (k, v) in overrides.as_object().unwrap() {
        if v.is_null() {
            config.as_object_mut().unwrap().remove(k);
        } else {
            config[k] = v.clone();
        }
    }
    let path = dir.join("experiment.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

#[test]
fn gen_traces_canonical_is_six_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run(&["gen-traces", "--preset", "canonical", "--out", dir.to_str().unwrap()]);
        assert_eq!(json(&out).as_array().unwrap().len(), 6);
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 6);
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
    }
}

#[test]
fn gen_traces_unknown_preset_lists_presets() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["gen-traces", "--preset", "nope", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for name in ["interactive-heavy", "batch-heavy", "heavy-tailed", "canonical"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn gen_traces_from_params_file() {
    let tmp = tempfile::tempdir().unwrap();
    let params = schedforge::workload::preset("batch-heavy").unwrap().params.clone();
    let path = tmp.path().join("mine.json");
    fs::write(&path, serde_json::to_string(&params).unwrap()).unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&[
        "gen-traces",
        "--params",
        path.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    json(&out);
    let trace = schedforge::workload::read_trace_file(out_dir.join("mine_seed7.trace.jsonl")).unwrap();
    assert_eq!(trace, schedforge::workload::generate_trace(&params, 7).unwrap());

    let mut bad = serde_json::to_value(&params).unwrap();
    bad["interactive_fraction"] = 1.5.into();
    fs::write(&path, bad.to_string()).unwrap();
    let out = run(&[
        "gen-traces",
        "--params",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn simulate_reads_trace_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("traces");
    json(&run(&[
        "gen-traces",
        "--preset",
        "heavy-tailed",
        "--out",
        dir.to_str().unwrap(),
    ]));
    let from_dir = json(&run(&[
        "simulate",
        "--baseline",
        "fifo",
        "--traces",
        dir.to_str().unwrap(),
    ]));
    let from_preset = json(&run(&["simulate", "--baseline", "fifo", "--traces", "heavy-tailed"]));
    assert_eq!(from_dir["median_score"], from_preset["median_score"]);
    assert_eq!(from_dir["traces"].as_array().unwrap().len(), 2);
}

#[test]
fn simulate_policy_syntax_error_exits_3_with_position() {
    let tmp = tempfile::tempdir().unwrap();
    let pol = tmp.path().join("bad.pol");
    fs::write(&pol, "init {\n}\nschedule(failures, pipelines) {\n  let x = ;\n}\n").unwrap();
    let out = run(&[
        "simulate",
        "--policy",
        pol.to_str().unwrap(),
        "--traces",
        "heavy-tailed",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("line 4, column"), "{}", stderr(&out));
}

#[test]
fn simulate_runtime_error_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let pol = tmp.path().join("oob.pol");
    let response = fs::read_to_string(repo().join("fixtures/scripted_discovery/response_002.txt")).unwrap();
    fs::write(&pol, schedforge::llm::extract_code_block(&response).unwrap()).unwrap();
    let out = run(&[
        "simulate",
        "--policy",
        pol.to_str().unwrap(),
        "--traces",
        "heavy-tailed",
    ]);
    assert_eq!(out.status.code(), Some(3));
    let err = stderr(&out);
    assert!(err.contains("runtime error at line 8"), "{err}");
    assert!(err.contains("at tick"), "{err}");
}

#[test]
fn simulate_missing_traces_exits_2() {
    let out = run(&["simulate", "--baseline", "fifo", "--traces", "/definitely/not/here"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--traces", "canonical"]);
    assert_eq!(out.status.code(), Some(2), "policy or baseline is required");
}

#[test]
fn simulate_p99_metric_and_custom_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("sim.json");
    let config = schedforge::sim::SimConfig::uniform(2, 16, 65_536, 20_000, 400);
    fs::write(&cfg, serde_json::to_string(&config).unwrap()).unwrap();
    let v = json(&run(&[
        "simulate",
        "--baseline",
        "fifo",
        "--traces",
        "heavy-tailed",
        "--config",
        cfg.to_str().unwrap(),
        "--metric",
        "p99-latency",
    ]));
    assert_eq!(v["target_metric"], "p99_latency");
    let p99s: Vec<f64> = v["traces"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["metrics"]["p99_latency"].as_f64().unwrap())
        .collect();
    assert_eq!(v["median_score"].as_f64().unwrap(), (p99s[0] + p99s[1]) / 2.0);

    fs::write(&cfg, r#"{"pools": [], "max_ticks": 10, "waiting_bound": 5}"#).unwrap();
    let out = run(&[
        "simulate",
        "--baseline",
        "fifo",
        "--traces",
        "heavy-tailed",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn discover_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), serde_json::json!({}));
    let summary = json(&run(&["discover", "--config", config.to_str().unwrap()]));
    assert_eq!(summary["best"]["iteration"], 4);
    let run_dir = tmp.path().join("runs/t");
    assert_eq!(PathBuf::from(summary["run_dir"].as_str().unwrap()), run_dir);
    for i in 1..=5 {
        assert!(run_dir.join(format!("policy_{i}.pol")).is_file());
    }
    let lines = fs::read_to_string(run_dir.join("records.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 5);

    let csv = tmp.path().join("report.csv");
    let first = run(&[
        "report",
        "--run",
        run_dir.to_str().unwrap(),
        "--csv",
        csv.to_str().unwrap(),
    ]);
    let second = run(&["report", "--run", run_dir.to_str().unwrap()]);
    assert_eq!(first.stdout, second.stdout);
    let report = json(&first);
    assert_eq!(report["best_iteration"], 4);
    assert_eq!(report["trajectory"].as_array().unwrap().len(), 5);
    assert_eq!(report["improvement_percent"], summary["best"]["improvement_percent"]);
    let csv = fs::read_to_string(csv).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("iteration,valid,score,error_kind,"));

    let manifest = fs::read_to_string(run_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"run_id\": \"t\""));
}

#[test]
fn discover_is_deterministic_apart_from_timestamps() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for id in ["a", "b"] {
        let config = write_config(tmp.path(), serde_json::json!({ "run_id": id, "iterations": 3 }));
        json(&run(&["discover", "--config", config.to_str().unwrap()]));
        outputs.push(tmp.path().join("runs").join(id));
    }
    for name in [
        "records.jsonl",
        "context_final.jsonl",
        "best.pol",
        "policy_1.pol",
        "policy_2.pol",
        "policy_3.pol",
    ] {
        assert_eq!(
            fs::read(outputs[0].join(name)).unwrap(),
            fs::read(outputs[1].join(name)).unwrap(),
            "{name}"
        );
    }
    let strip = |dir: &Path| {
        let mut v: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
        for k in ["run_id", "wall_time_seconds", "started_at_unix"] {
            v.as_object_mut().unwrap().remove(k);
        }
        v
    };
    assert_eq!(strip(&outputs[0]), strip(&outputs[1]));
}

#[test]
fn discover_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), serde_json::json!({ "iterations": 0 }));
    let out = run(&["discover", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("iterations must be >= 1"), "{}", stderr(&out));

    let config = write_config(tmp.path(), serde_json::json!({ "token_budget": null }));
    let out = run(&["discover", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("token_budget"), "{}", stderr(&out));

    let config = write_config(tmp.path(), serde_json::json!({ "traces": "no-such-thing" }));
    assert_eq!(
        run(&["discover", "--config", config.to_str().unwrap()]).status.code(),
        Some(2)
    );

    let config = write_config(tmp.path(), serde_json::json!({ "api_key": "sk-123" }));
    assert_eq!(
        run(&["discover", "--config", config.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn discover_provider_failure_exits_4_and_keeps_partial_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), serde_json::json!({ "iterations": 7 }));
    let out = run(&["discover", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let run_dir = tmp.path().join("runs/t");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "aborted");
    assert_eq!(
        fs::read_to_string(run_dir.join("records.jsonl"))
            .unwrap()
            .lines()
            .count(),
        5
    );
}

#[test]
fn discover_http_without_key_exits_4_and_never_writes_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let var = "SCHEDFORGE_CLI_TEST_KEY_UNSET";
    let config = write_config(
        tmp.path(),
        serde_json::json!({
            "iterations": 1,
            "provider": {
                "kind": "http_chat",
                "endpoint": "http://127.0.0.1:9/v1/chat/completions",
                "api_key_env_var": var,
                "model": "m",
                "max_retries": 0
            }
        }),
    );
    let out = bin()
        .args(["discover", "--config", config.to_str().unwrap()])
        .env_remove(var)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains(var));

    let secret = "sk-test-secret-value-123";
    let out = bin()
        .args(["discover", "--config", config.to_str().unwrap()])
        .env(var, secret)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    for entry in fs::read_dir(tmp.path().join("runs/t")).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        assert!(!text.contains(secret));
    }
}

#[test]
fn report_improvement_formula() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), serde_json::json!({ "iterations": 4 }));
    json(&run(&["discover", "--config", config.to_str().unwrap()]));
    let run_dir = tmp.path().join("runs/t");
    let manifest_path = run_dir.join("manifest.json");
    let mut manifest: Value = serde_json::from_str(&fs::read_to_string(&manifest_path).unwrap()).unwrap();

    let records = fs::read_to_string(run_dir.join("records.jsonl")).unwrap();
    let best: f64 = records
        .lines()
        .filter_map(|l| serde_json::from_str::<Value>(l).unwrap()["score"].as_f64())
        .fold(f64::MIN, f64::max);

    manifest["baseline_score"] = (best / 2.0).into();
    fs::write(&manifest_path, manifest.to_string()).unwrap();
    let report = json(&run(&["report", "--run", run_dir.to_str().unwrap()]));
    assert_eq!(report["improvement_percent"].as_f64().unwrap(), 100.0);

    manifest["baseline_score"] = best.into();
    fs::write(&manifest_path, manifest.to_string()).unwrap();
    let report = json(&run(&["report", "--run", run_dir.to_str().unwrap()]));
    assert_eq!(report["improvement_percent"].as_f64().unwrap(), 0.0);
}

#[test]
fn report_corrupt_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["report", "--run", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let config = write_config(tmp.path(), serde_json::json!({ "iterations": 3 }));
    json(&run(&["discover", "--config", config.to_str().unwrap()]));
    let run_dir = tmp.path().join("runs/t");
    let records_path = run_dir.join("records.jsonl");
    let mut lines: Vec<String> = fs::read_to_string(&records_path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines[1] = "{\"iteration\": 2, \"oops".into();
    fs::write(&records_path, lines.join("\n")).unwrap();
    let out = run(&["report", "--run", run_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    fs::write(run_dir.join("manifest.json"), "{ not json").unwrap();
    assert_eq!(
        run(&["report", "--run", run_dir.to_str().unwrap()]).status.code(),
        Some(2)
    );
}
