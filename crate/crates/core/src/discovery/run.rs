use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{
    build_initial_context, compress_context, evaluate_baseline, evaluate_policy, select_best, synthesize_feedback,
    BestPolicy, Context, ContextEntry, DiscoveryConfig, DiscoveryError, EntryRole, Evaluation, IterationRecord,
    RunLedger, TargetMetric,
};
use crate::llm::{extract_code_block, GenerationParams, Provider, ProviderConfig};
use crate::sim::SimConfig;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceId {
    pub params_fingerprint: String,
    pub seed: u64,
    pub pipelines: usize,
}

/// `manifest.json`. Everything except `wall_time_seconds` and
/// `started_at_unix` is a deterministic function of the inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: String,
    pub iterations: usize,
    pub completed_iterations: usize,
    pub target_metric: TargetMetric,
    pub token_budget: u64,
    pub max_steps: u64,
    pub sim_config: SimConfig,
    pub provider: ProviderConfig,
    pub generation: GenerationParams,
    pub traces: Vec<TraceId>,
    pub baseline_score: f64,
    pub baseline: Evaluation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best: Option<BestPolicy>,
    pub ledger: RunLedger,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub wall_time_seconds: f64,
    pub started_at_unix: u64,
}

#[derive(Clone, Debug)]
pub struct DiscoveryOutcome {
    pub best: Option<BestPolicy>,
    pub records: Vec<IterationRecord>,
    pub ledger: RunLedger,
    pub baseline: Evaluation,
    pub context: Context,
    pub manifest: RunManifest,
}

struct RunDir<'a> {
    dir: Option<&'a Path>,
}

impl RunDir<'_> {
    fn write(&self, name: &str, contents: &str) -> std::io::Result<()> {
        match self.dir {
            Some(dir) => fs::write(dir.join(name), contents),
            None => Ok(()),
        }
    }

    fn append_record(&self, record: &IterationRecord) -> std::io::Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("records.jsonl"))?;
        serde_json::to_writer(&mut f, record)?;
        f.write_all(b"\n")
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> std::io::Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let mut w = BufWriter::new(File::create(dir.join(name))?);
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()
    }

    fn write_context(&self, context: &Context) -> std::io::Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        let mut w = BufWriter::new(File::create(dir.join("context_final.jsonl"))?);
        for entry in &context.entries {
            serde_json::to_writer(&mut w, entry)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }
}

/// Runs `config.iterations` rounds of request, validate, simulate, feed back.
///
/// With a `run_dir`, every response is saved as `policy_<i>.pol` (valid or
/// not), records are appended to `records.jsonl` as they complete, and
/// `manifest.json`, `best.pol` and `context_final.jsonl` are written at the
/// end, or when a provider error stops the run early.
pub fn run_discovery(
    config: &DiscoveryConfig,
    provider: &mut dyn Provider,
    run_dir: Option<&Path>,
) -> Result<DiscoveryOutcome, DiscoveryError> {
    config.validate()?;
    let started = Instant::now();
    let started_at_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let out = RunDir { dir: run_dir };
    if let Some(dir) = run_dir {
        fs::create_dir_all(dir)?;
        let _ = fs::remove_file(dir.join("records.jsonl"));
    }

    let target = config.target_metric;
    let baseline = evaluate_baseline(&config.traces, &config.sim_config, target).map_err(DiscoveryError::Baseline)?;
    let mut context = build_initial_context(target);
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut ledger = RunLedger::default();
    let mut best_so_far: Option<f64> = None;
    let mut failure: Option<DiscoveryError> = None;

    for iteration in 1..=config.iterations {
        let response = match provider.complete(&context.to_messages(), &config.generation) {
            Ok(r) => r,
            Err(error) => {
                failure = Some(DiscoveryError::Provider {
                    error,
                    completed: records.len(),
                });
                break;
            }
        };
        ledger.record(iteration, &response);

        let (source, result) = match extract_code_block(&response.text) {
            Ok(source) => {
                let result = evaluate_policy(&source, &config.traces, &config.sim_config, target, config.max_steps);
                (source, result)
            }
            Err(e) => (response.text.clone(), Err(e.into())),
        };
        out.write(&format!("policy_{iteration}.pol"), &source)?;

        let mut record = IterationRecord::from_result(iteration, source, result);
        record.feedback_text = synthesize_feedback(&record, best_so_far, Some(baseline.score), target);
        if let Some(score) = record.score {
            if best_so_far.is_none_or(|b| target.better(score, b)) {
                best_so_far = Some(score);
            }
        }

        let outcome = record.outcome();
        context.push(ContextEntry::for_iteration(
            EntryRole::Assistant,
            response.text,
            iteration,
            outcome.clone(),
        ));
        context.push(ContextEntry::for_iteration(
            EntryRole::Feedback,
            record.feedback_text.clone(),
            iteration,
            outcome,
        ));
        out.append_record(&record)?;
        records.push(record);

        if context.tokens() > config.token_budget {
            match compress_context(&context, config.token_budget) {
                Ok(c) => context = c,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
    }

    let best = select_best(&records, target, Some(baseline.score));
    let manifest = RunManifest {
        run_id: config.run_id.clone(),
        status: if failure.is_some() { "aborted" } else { "completed" }.to_string(),
        iterations: config.iterations,
        completed_iterations: records.len(),
        target_metric: target,
        token_budget: config.token_budget,
        max_steps: config.max_steps,
        sim_config: config.sim_config.clone(),
        provider: config.provider.clone(),
        generation: config.generation.clone(),
        traces: config
            .traces
            .iter()
            .map(|t| TraceId {
                params_fingerprint: t.params_fingerprint.clone(),
                seed: t.seed,
                pipelines: t.pipelines.len(),
            })
            .collect(),
        baseline_score: baseline.score,
        baseline: baseline.clone(),
        best: best.clone(),
        ledger: ledger.clone(),
        error: failure.as_ref().map(|e| e.to_string()),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        started_at_unix,
    };
    if let Some(b) = &best {
        out.write("best.pol", &b.policy_source)?;
    }
    out.write_context(&context)?;
    out.write_json("manifest.json", &manifest)?;

    if let Some(e) = failure {
        return Err(e);
    }
    Ok(DiscoveryOutcome {
        best,
        records,
        ledger,
        baseline,
        context,
        manifest,
    })
}
