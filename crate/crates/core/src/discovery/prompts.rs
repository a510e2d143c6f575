use std::fmt::Write;

use super::TargetMetric;
use crate::policy::{BUILTINS, FIFO_SOURCE};

const SEMANTICS: &str = "\
You are writing a scheduling policy for a simulated serverless (FaaS) data plane.

Simulator:
- Time advances in integer ticks. Work arrives as pipelines: DAGs of operations (ops).
  Each pipeline has a workload_class (\"interactive\" or \"batch\"), an arrival_tick and a timeout.
- Each op has cpu_req, mem_req, duration_hint (exact run time in ticks) and deps (op ids that must finish first).
  An op is \"ready\" when all of its deps are done.
- There are several resource pools (worker VMs), each with fixed cpu and memory capacity.
- Every tick, in order: new pipelines arrive; pipelines with now - arrival_tick >= timeout fail
  (their running ops are killed and a failure notice is delivered on the next call); your schedule
  block runs once; suspensions are applied, then assignments; running ops advance by one tick.
  Successors of an op that finishes become ready on the next tick.
- A suspended op goes back to ready and restarts from zero when assigned again.
- Each assignment is checked on its own: the op must exist and be ready, the pool must exist, the op must
  not be assigned twice in one tick, and the op must fit into the pool's remaining free cpu and memory.
  Rejected decisions are skipped and reported as violations; they never crash the run.
- A monitor also reports an op that stays ready but unassigned for too long (waiting_bound_exceeded).";

const GRAMMAR: &str = "\
Policy language (files end in .pol):
  program        := init_block schedule_block
  init_block     := \"init\" block
  schedule_block := \"schedule\" \"(\" \"failures\" \",\" \"pipelines\" \")\" block
  block          := \"{\" stmt* \"}\"
  stmt           := \"let\" IDENT \"=\" expr \";\" | lvalue \"=\" expr \";\"
                  | \"if\" expr block (\"else\" (block | if_stmt))? | \"for\" IDENT \"in\" expr block | expr \";\"
  lvalue         := IDENT (\".\" IDENT | \"[\" expr \"]\")*
  expr           := number | string | true | false | lvalue | [a, b, ...] | {key: value, ...}
                  | expr op expr | - expr | not expr | IDENT \"(\" args \")\"
  operators      := + - * / %  == != < <= > >=  and or not
- Comments start with // or #. Logical operators are the words and, or, not.
- Values: numbers, booleans, strings, lists, records. Lists and records are copied on assignment.
  Mixing types in a comparison, a missing field, an index out of range and division by zero are runtime errors.
- `state` is a record that persists across ticks; create its fields in init (e.g. state.queue = [];).
- In schedule, `failures` is a list of {pipeline_id, reason, tick} and `pipelines` lists the pipelines that
  arrived this tick as {pipeline_id, workload_class, arrival_tick, timeout, ops}. Each op record has
  {op_id, pipeline_id, workload_class, cpu_req, mem_req, duration_hint, deps, status}. Records in `pipelines`
  are snapshots: call ready_ops(...) each tick for current readiness.
- There are no user-defined functions and no while loops; each init/schedule call has a step budget.";

const METRICS: &str = "\
Metrics (per trace; a score is the median over all evaluation traces):
- throughput: completed pipelines per 1000 ticks of simulated time (higher is better).
- p99_latency: 99th nearest-rank percentile of completion_tick - arrival_tick over completed pipelines (lower is better).
- failed: pipelines that hit their timeout. violations: rejected decisions plus monitor events.";

pub fn system_prompt() -> String {
    let mut s = String::new();
    s.push_str(SEMANTICS);
    s.push_str("\n\n");
    s.push_str(GRAMMAR);
    s.push_str("\n\nBuiltins (assign, suspend and executor queries only work inside schedule):\n");
    for b in BUILTINS {
        let _ = writeln!(s, "- {}: {}", b.signature, b.doc);
    }
    s.push('\n');
    s.push_str(METRICS);
    s.push_str("\n\nExisting policy (FIFO baseline):\n```\n");
    s.push_str(FIFO_SOURCE);
    s.push_str("```\n");
    s
}

pub fn user_prompt(target: TargetMetric) -> String {
    let goal = match target {
        TargetMetric::Throughput => "maximize median throughput",
        TargetMetric::P99Latency => "minimize median p99_latency",
    };
    format!(
        "Write a new scheduling policy that aims to {goal} (target metric: {}) across the evaluation traces. \
Start from the FIFO baseline above and improve on it. After each attempt you will get the simulation \
results or the error. Reply with the complete policy in a single fenced code block.",
        target.as_str()
    )
}
