use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;

pub type Tick = u64;
pub type OpId = u64;
pub type PipelineId = u64;
pub type PoolId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkloadClass {
    Interactive,
    Batch,
}

impl WorkloadClass {
    pub fn as_str(self) -> &'static str {
        match self {
            WorkloadClass::Interactive => "interactive",
            WorkloadClass::Batch => "batch",
        }
    }
}

impl fmt::Display for WorkloadClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One function of a pipeline DAG.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpSpec {
    pub op_id: OpId,
    pub pipeline_id: PipelineId,
    pub cpu_req: u32,
    pub mem_req: u32,
    pub duration: Tick,
    #[serde(default)]
    pub deps: Vec<OpId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub pipeline_id: PipelineId,
    pub arrival_tick: Tick,
    pub workload_class: WorkloadClass,
    pub ops: Vec<OpSpec>,
    pub timeout: Tick,
}

impl PipelineSpec {
    /// Length of the longest dependency chain, weighted by op duration.
    ///
    /// Fails when a dependency points outside the pipeline or the graph has a cycle.
    pub fn critical_path(&self) -> Result<Tick, SimError> {
        let index: HashMap<OpId, usize> = self.ops.iter().enumerate().map(|(i, op)| (op.op_id, i)).collect();
        let mut indegree = vec![0usize; self.ops.len()];
        let mut successors = vec![Vec::new(); self.ops.len()];
        for (i, op) in self.ops.iter().enumerate() {
            for dep in &op.deps {
                let &d = index.get(dep).ok_or_else(|| {
                    SimError::InvalidTrace(format!(
                        "pipeline {}: op {} depends on {} which is not part of the pipeline",
                        self.pipeline_id, op.op_id, dep
                    ))
                })?;
                successors[d].push(i);
                indegree[i] += 1;
            }
        }
        let mut finish = vec![0 as Tick; self.ops.len()];
        let mut frontier: Vec<usize> = (0..self.ops.len()).filter(|&i| indegree[i] == 0).collect();
        let mut visited = 0;
        while let Some(i) = frontier.pop() {
            visited += 1;
            finish[i] += self.ops[i].duration;
            for &s in &successors[i] {
                finish[s] = finish[s].max(finish[i]);
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    frontier.push(s);
                }
            }
        }
        if visited != self.ops.len() {
            return Err(SimError::InvalidTrace(format!(
                "pipeline {}: dependency graph has a cycle",
                self.pipeline_id
            )));
        }
        Ok(finish.into_iter().max().unwrap_or(0))
    }

    /// Structural checks that do not need a pool configuration.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidTrace(format!("pipeline {}: {msg}", self.pipeline_id)));
        if self.ops.is_empty() {
            return bad("has no ops".into());
        }
        let mut seen = HashSet::new();
        for op in &self.ops {
            if op.pipeline_id != self.pipeline_id {
                return bad(format!("op {} claims pipeline {}", op.op_id, op.pipeline_id));
            }
            if !seen.insert(op.op_id) {
                return bad(format!("duplicate op id {}", op.op_id));
            }
            if op.cpu_req == 0 || op.mem_req == 0 {
                return bad(format!("op {} has a zero resource demand", op.op_id));
            }
            if op.duration == 0 {
                return bad(format!("op {} has zero duration", op.op_id));
            }
        }
        let critical = self.critical_path()?;
        if self.timeout < critical {
            return bad(format!(
                "timeout {} is shorter than the critical path {}",
                self.timeout, critical
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolConfig {
    pub pool_id: PoolId,
    pub cpu_capacity: u32,
    pub mem_capacity: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub pools: Vec<PoolConfig>,
    pub max_ticks: Tick,
    pub waiting_bound: Tick,
}

impl SimConfig {
    /// `n` identical pools.
    pub fn uniform(n: usize, cpu_capacity: u32, mem_capacity: u32, max_ticks: Tick, waiting_bound: Tick) -> Self {
        SimConfig {
            pools: (0..n)
                .map(|pool_id| PoolConfig {
                    pool_id,
                    cpu_capacity,
                    mem_capacity,
                })
                .collect(),
            max_ticks,
            waiting_bound,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.pools.is_empty() {
            return Err(SimError::InvalidConfig("at least one pool is required".into()));
        }
        for (i, pool) in self.pools.iter().enumerate() {
            if pool.pool_id != i {
                return Err(SimError::InvalidConfig(format!(
                    "pool ids must be contiguous from 0; position {i} has id {}",
                    pool.pool_id
                )));
            }
            if pool.cpu_capacity == 0 || pool.mem_capacity == 0 {
                return Err(SimError::InvalidConfig(format!("pool {i} has zero capacity")));
            }
        }
        if self.max_ticks == 0 {
            return Err(SimError::InvalidConfig("max_ticks must be at least 1".into()));
        }
        if self.waiting_bound == 0 {
            return Err(SimError::InvalidConfig("waiting_bound must be at least 1".into()));
        }
        Ok(())
    }

    pub fn max_cpu(&self) -> u32 {
        self.pools.iter().map(|p| p.cpu_capacity).max().unwrap_or(0)
    }

    pub fn max_mem(&self) -> u32 {
        self.pools.iter().map(|p| p.mem_capacity).max().unwrap_or(0)
    }
}

impl Default for SimConfig {
    /// Four 16-core pools; the configuration the canonical traces are sized for.
    fn default() -> Self {
        SimConfig::uniform(4, 16, 65_536, 20_000, 400)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    pub op_id: OpId,
    pub pool_id: PoolId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suspension {
    pub op_id: OpId,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleResult {
    pub suspensions: Vec<Suspension>,
    pub assignments: Vec<Assignment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Timeout,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureNotice {
    pub pipeline_id: PipelineId,
    pub reason: FailureReason,
    pub tick: Tick,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpStatus {
    Waiting,
    Ready,
    Running,
    Done,
}

impl OpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OpStatus::Waiting => "waiting",
            OpStatus::Ready => "ready",
            OpStatus::Running => "running",
            OpStatus::Done => "done",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineStatus {
    InFlight,
    Completed,
    Failed,
}

impl PipelineStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineStatus::InFlight => "in_flight",
            PipelineStatus::Completed => "completed",
            PipelineStatus::Failed => "failed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Failed,
    Unfinished,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub pipeline_id: PipelineId,
    pub arrival_tick: Tick,
    pub terminal_tick: Tick,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency: Option<Tick>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Oversubscription,
    NotReady,
    UnknownOp,
    UnknownPool,
    DuplicateAssignment,
    SuspendNotRunning,
    WaitingBoundExceeded,
}

impl ViolationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationKind::Oversubscription => "oversubscription",
            ViolationKind::NotReady => "not_ready",
            ViolationKind::UnknownOp => "unknown_op",
            ViolationKind::UnknownPool => "unknown_pool",
            ViolationKind::DuplicateAssignment => "duplicate_assignment",
            ViolationKind::SuspendNotRunning => "suspend_not_running",
            ViolationKind::WaitingBoundExceeded => "waiting_bound_exceeded",
        }
    }

    /// True for kinds that record a rejected policy decision, false for monitor findings.
    pub fn is_rejection(self) -> bool {
        self != ViolationKind::WaitingBoundExceeded
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationEvent {
    pub tick: Tick,
    pub kind: ViolationKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub op_id: Option<OpId>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_id: Option<PoolId>,
    pub message: String,
}

/// One accepted placement; the line format of assignment logs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub tick: Tick,
    pub op_id: OpId,
    pub pool_id: PoolId,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuspensionRecord {
    pub tick: Tick,
    pub op_id: OpId,
    pub pool_id: PoolId,
}
