use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::metrics::{compute_metrics, SimMetrics};
use super::types::*;
use super::view::ExecutorView;
use super::{Policy, SimError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolUsage {
    pub cpu_used: u32,
    pub mem_used: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunningOp {
    pub pool_id: PoolId,
    pub elapsed: Tick,
}

/// Executor world state. Ops and pipelines appear in the status maps once
/// their pipeline has arrived.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub clock: Tick,
    pub pool_usage: Vec<PoolUsage>,
    pub running: BTreeMap<OpId, RunningOp>,
    pub op_status: BTreeMap<OpId, OpStatus>,
    pub pipeline_status: BTreeMap<PipelineId, PipelineStatus>,
    pub pending_failures: Vec<FailureNotice>,
    pub completion_log: Vec<CompletionRecord>,
    pub violation_log: Vec<ViolationEvent>,
    pub assignment_log: Vec<AssignmentRecord>,
    pub suspension_log: Vec<SuspensionRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutput {
    pub metrics: SimMetrics,
    pub completion_log: Vec<CompletionRecord>,
    pub violation_log: Vec<ViolationEvent>,
    pub assignment_log: Vec<AssignmentRecord>,
}

pub struct Simulator<'t> {
    trace: &'t [PipelineSpec],
    config: SimConfig,
    state: SimState,
    pipeline_index: HashMap<PipelineId, usize>,
    op_index: HashMap<OpId, (usize, usize)>,
    successors: HashMap<OpId, Vec<OpId>>,
    arrival_order: Vec<usize>,
    next_arrival: usize,
    in_flight: BTreeSet<PipelineId>,
    remaining_deps: HashMap<OpId, usize>,
    remaining_ops: HashMap<PipelineId, usize>,
    ready_since: BTreeMap<OpId, Tick>,
    waiting_flagged: HashSet<OpId>,
    accepted_this_tick: HashSet<OpId>,
    terminal: usize,
}

pub fn init_sim<'t>(trace: &'t [PipelineSpec], config: SimConfig) -> Result<Simulator<'t>, SimError> {
    Simulator::new(trace, config)
}

/// Steps a fresh simulation until every pipeline is terminal or `max_ticks` is reached.
pub fn run<P: Policy + ?Sized>(
    trace: &[PipelineSpec],
    policy: &mut P,
    config: &SimConfig,
) -> Result<RunOutput, SimError> {
    let mut sim = Simulator::new(trace, config.clone())?;
    while !sim.is_done() {
        sim.step(policy)?;
    }
    Ok(sim.finish())
}

impl<'t> Simulator<'t> {
    pub fn new(trace: &'t [PipelineSpec], config: SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let (max_cpu, max_mem) = (config.max_cpu(), config.max_mem());
        let mut pipeline_index = HashMap::new();
        let mut op_index = HashMap::new();
        let mut successors: HashMap<OpId, Vec<OpId>> = HashMap::new();
        for (pi, pipeline) in trace.iter().enumerate() {
            pipeline.validate()?;
            if pipeline_index.insert(pipeline.pipeline_id, pi).is_some() {
                return Err(SimError::InvalidTrace(format!(
                    "duplicate pipeline id {}",
                    pipeline.pipeline_id
                )));
            }
            for (oi, op) in pipeline.ops.iter().enumerate() {
                if op_index.insert(op.op_id, (pi, oi)).is_some() {
                    return Err(SimError::InvalidTrace(format!("duplicate op id {}", op.op_id)));
                }
                if op.cpu_req > max_cpu || op.mem_req > max_mem {
                    return Err(SimError::InvalidTrace(format!(
                        "op {} needs {} cpu / {} mem but the largest pool has {} / {}",
                        op.op_id, op.cpu_req, op.mem_req, max_cpu, max_mem
                    )));
                }
                for &dep in &op.deps {
                    successors.entry(dep).or_default().push(op.op_id);
                }
            }
        }
        let mut arrival_order: Vec<usize> = (0..trace.len()).collect();
        arrival_order.sort_by_key(|&i| trace[i].arrival_tick);
        let state = SimState {
            pool_usage: vec![PoolUsage::default(); config.pools.len()],
            ..SimState::default()
        };
        Ok(Simulator {
            trace,
            config,
            state,
            pipeline_index,
            op_index,
            successors,
            arrival_order,
            next_arrival: 0,
            in_flight: BTreeSet::new(),
            remaining_deps: HashMap::new(),
            remaining_ops: HashMap::new(),
            ready_since: BTreeMap::new(),
            waiting_flagged: HashSet::new(),
            accepted_this_tick: HashSet::new(),
            terminal: 0,
        })
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn trace(&self) -> &'t [PipelineSpec] {
        self.trace
    }

    pub fn view(&self) -> ExecutorView<'_> {
        ExecutorView::new(self)
    }

    /// Number of pipelines delivered so far.
    pub fn arrived(&self) -> usize {
        self.next_arrival
    }

    pub fn is_done(&self) -> bool {
        self.terminal == self.trace.len() || self.state.clock >= self.config.max_ticks
    }

    pub(crate) fn pipeline(&self, id: PipelineId) -> Option<&'t PipelineSpec> {
        self.pipeline_index.get(&id).map(|&i| &self.trace[i])
    }

    pub(crate) fn op(&self, id: OpId) -> Option<&'t OpSpec> {
        self.op_index.get(&id).map(|&(p, o)| &self.trace[p].ops[o])
    }

    pub(crate) fn op_class(&self, id: OpId) -> Option<WorkloadClass> {
        self.op_index.get(&id).map(|&(p, _)| self.trace[p].workload_class)
    }

    pub fn step<P: Policy + ?Sized>(&mut self, policy: &mut P) -> Result<(), SimError> {
        if self.state.clock >= self.config.max_ticks {
            return Err(SimError::Exhausted(self.config.max_ticks));
        }
        let now = self.state.clock;

        let arrived = self.deliver_arrivals(now);
        self.expire_timeouts(now);
        self.check_waiting_bound(now);

        let failures = std::mem::take(&mut self.state.pending_failures);
        let decisions = policy
            .schedule(&failures, &arrived, &self.view())
            .map_err(|error| SimError::PolicyRuntime { tick: now, error })?;

        for suspension in &decisions.suspensions {
            self.apply_suspension(now, *suspension);
        }
        for assignment in &decisions.assignments {
            match self.validate_assignment(assignment) {
                Ok(()) => self.place(now, *assignment),
                Err(event) => self.state.violation_log.push(event),
            }
        }

        self.accepted_this_tick.clear();
        self.advance(now);
        self.state.clock += 1;
        Ok(())
    }

    fn deliver_arrivals(&mut self, now: Tick) -> Vec<&'t PipelineSpec> {
        let mut arrived = Vec::new();
        while let Some(&pi) = self.arrival_order.get(self.next_arrival) {
            let pipeline = &self.trace[pi];
            if pipeline.arrival_tick > now {
                break;
            }
            self.next_arrival += 1;
            self.state
                .pipeline_status
                .insert(pipeline.pipeline_id, PipelineStatus::InFlight);
            self.in_flight.insert(pipeline.pipeline_id);
            self.remaining_ops.insert(pipeline.pipeline_id, pipeline.ops.len());
            for op in &pipeline.ops {
                self.remaining_deps.insert(op.op_id, op.deps.len());
                let status = if op.deps.is_empty() {
                    self.ready_since.insert(op.op_id, now);
                    OpStatus::Ready
                } else {
                    OpStatus::Waiting
                };
                self.state.op_status.insert(op.op_id, status);
            }
            arrived.push(pipeline);
        }
        arrived
    }

    fn expire_timeouts(&mut self, now: Tick) {
        let expired: Vec<PipelineId> = self
            .in_flight
            .iter()
            .copied()
            .filter(|id| {
                let p = self.pipeline(*id).expect("in-flight pipeline is indexed");
                now - p.arrival_tick >= p.timeout
            })
            .collect();
        for id in expired {
            let pipeline = self.pipeline(id).expect("in-flight pipeline is indexed");
            for op in &pipeline.ops {
                if let Some(run) = self.state.running.remove(&op.op_id) {
                    let usage = &mut self.state.pool_usage[run.pool_id];
                    usage.cpu_used -= op.cpu_req;
                    usage.mem_used -= op.mem_req;
                }
                self.ready_since.remove(&op.op_id);
                self.waiting_flagged.remove(&op.op_id);
                let status = self.state.op_status.get_mut(&op.op_id).expect("arrived op has status");
                if *status != OpStatus::Done {
                    *status = OpStatus::Waiting;
                }
            }
            self.in_flight.remove(&id);
            self.terminal += 1;
            self.state.pipeline_status.insert(id, PipelineStatus::Failed);
            self.state.completion_log.push(CompletionRecord {
                pipeline_id: id,
                arrival_tick: pipeline.arrival_tick,
                terminal_tick: now,
                outcome: Outcome::Failed,
                latency: None,
            });
            self.state.pending_failures.push(FailureNotice {
                pipeline_id: id,
                reason: FailureReason::Timeout,
                tick: now,
            });
        }
    }

    fn check_waiting_bound(&mut self, now: Tick) {
        let bound = self.config.waiting_bound;
        for (&op_id, &since) in &self.ready_since {
            if now - since > bound && self.waiting_flagged.insert(op_id) {
                self.state.violation_log.push(ViolationEvent {
                    tick: now,
                    kind: ViolationKind::WaitingBoundExceeded,
                    op_id: Some(op_id),
                    pool_id: None,
                    message: format!(
                        "op {op_id} has been ready since tick {since}, longer than the bound of {bound} ticks"
                    ),
                });
            }
        }
    }

    fn apply_suspension(&mut self, now: Tick, suspension: Suspension) {
        let op_id = suspension.op_id;
        let Some(op) = self.op(op_id) else {
            self.state.violation_log.push(ViolationEvent {
                tick: now,
                kind: ViolationKind::UnknownOp,
                op_id: Some(op_id),
                pool_id: None,
                message: format!("suspend: op {op_id} does not exist"),
            });
            return;
        };
        let Some(run) = self.state.running.remove(&op_id) else {
            let status = self.state.op_status.get(&op_id).map_or("not arrived", |s| s.as_str());
            self.state.violation_log.push(ViolationEvent {
                tick: now,
                kind: ViolationKind::SuspendNotRunning,
                op_id: Some(op_id),
                pool_id: None,
                message: format!("suspend: op {op_id} is not running (status {status})"),
            });
            return;
        };
        let usage = &mut self.state.pool_usage[run.pool_id];
        usage.cpu_used -= op.cpu_req;
        usage.mem_used -= op.mem_req;
        self.state.op_status.insert(op_id, OpStatus::Ready);
        self.ready_since.insert(op_id, now);
        self.state.suspension_log.push(SuspensionRecord {
            tick: now,
            op_id,
            pool_id: run.pool_id,
        });
    }

    /// Checks an assignment against the state left by the suspensions and the
    /// assignments already accepted this tick.
    pub fn validate_assignment(&self, a: &Assignment) -> Result<(), ViolationEvent> {
        let now = self.state.clock;
        let reject = |kind: ViolationKind, message: String| ViolationEvent {
            tick: now,
            kind,
            op_id: Some(a.op_id),
            pool_id: Some(a.pool_id),
            message,
        };
        let Some(op) = self.op(a.op_id) else {
            return Err(reject(
                ViolationKind::UnknownOp,
                format!("assign: op {} does not exist", a.op_id),
            ));
        };
        let Some(pool) = self.config.pools.get(a.pool_id) else {
            return Err(reject(
                ViolationKind::UnknownPool,
                format!(
                    "assign: pool {} does not exist (num_pools = {})",
                    a.pool_id,
                    self.config.pools.len()
                ),
            ));
        };
        if self.accepted_this_tick.contains(&a.op_id) {
            return Err(reject(
                ViolationKind::DuplicateAssignment,
                format!("assign: op {} was already assigned this tick", a.op_id),
            ));
        }
        let pipeline_live = self.state.pipeline_status.get(&op.pipeline_id) == Some(&PipelineStatus::InFlight);
        let status = self.state.op_status.get(&a.op_id).copied();
        if !pipeline_live || status != Some(OpStatus::Ready) {
            let why = match (self.state.pipeline_status.get(&op.pipeline_id), status) {
                (None, _) => "its pipeline has not arrived".to_string(),
                (Some(PipelineStatus::Completed), _) => "its pipeline already completed".to_string(),
                (Some(PipelineStatus::Failed), _) => "its pipeline has failed".to_string(),
                (_, Some(s)) => format!("its status is {}", s.as_str()),
                (_, None) => "it has no status".to_string(),
            };
            return Err(reject(
                ViolationKind::NotReady,
                format!("assign: op {} is not ready: {why}", a.op_id),
            ));
        }
        let usage = self.state.pool_usage[a.pool_id];
        let cpu_free = pool.cpu_capacity - usage.cpu_used;
        let mem_free = pool.mem_capacity - usage.mem_used;
        if op.cpu_req > cpu_free || op.mem_req > mem_free {
            return Err(reject(
                ViolationKind::Oversubscription,
                format!(
                    "assign: op {} needs {} cpu / {} mem but pool {} has {} cpu / {} mem free",
                    a.op_id, op.cpu_req, op.mem_req, a.pool_id, cpu_free, mem_free
                ),
            ));
        }
        Ok(())
    }

    fn place(&mut self, now: Tick, a: Assignment) {
        let op = self.op(a.op_id).expect("validated op");
        let usage = &mut self.state.pool_usage[a.pool_id];
        usage.cpu_used += op.cpu_req;
        usage.mem_used += op.mem_req;
        self.state.running.insert(
            a.op_id,
            RunningOp {
                pool_id: a.pool_id,
                elapsed: 0,
            },
        );
        self.state.op_status.insert(a.op_id, OpStatus::Running);
        self.ready_since.remove(&a.op_id);
        self.waiting_flagged.remove(&a.op_id);
        self.accepted_this_tick.insert(a.op_id);
        self.state.assignment_log.push(AssignmentRecord {
            tick: now,
            op_id: a.op_id,
            pool_id: a.pool_id,
        });
    }

    fn advance(&mut self, now: Tick) {
        let mut finished = Vec::new();
        for (&op_id, run) in self.state.running.iter_mut() {
            run.elapsed += 1;
            let op = {
                let (p, o) = self.op_index[&op_id];
                &self.trace[p].ops[o]
            };
            if run.elapsed == op.duration {
                finished.push(op_id);
            }
        }
        let mut completed = Vec::new();
        for op_id in finished {
            let op = self.op(op_id).expect("running op is indexed");
            let run = self.state.running.remove(&op_id).expect("finished op was running");
            let usage = &mut self.state.pool_usage[run.pool_id];
            usage.cpu_used -= op.cpu_req;
            usage.mem_used -= op.mem_req;
            self.state.op_status.insert(op_id, OpStatus::Done);
            if let Some(succ) = self.successors.get(&op_id) {
                for s in succ {
                    let left = self
                        .remaining_deps
                        .get_mut(s)
                        .expect("successor arrived with its pipeline");
                    *left -= 1;
                    if *left == 0 {
                        self.state.op_status.insert(*s, OpStatus::Ready);
                        self.ready_since.insert(*s, now + 1);
                    }
                }
            }
            let left = self.remaining_ops.get_mut(&op.pipeline_id).expect("pipeline arrived");
            *left -= 1;
            if *left == 0 {
                completed.push(op.pipeline_id);
            }
        }
        completed.sort_unstable();
        for id in completed {
            let pipeline = self.pipeline(id).expect("completed pipeline is indexed");
            self.in_flight.remove(&id);
            self.terminal += 1;
            self.state.pipeline_status.insert(id, PipelineStatus::Completed);
            self.state.completion_log.push(CompletionRecord {
                pipeline_id: id,
                arrival_tick: pipeline.arrival_tick,
                terminal_tick: now + 1,
                outcome: Outcome::Completed,
                latency: Some(now + 1 - pipeline.arrival_tick),
            });
        }
    }

    /// Closes the run: in-flight and never-arrived pipelines become `unfinished`.
    pub fn finish(mut self) -> RunOutput {
        let cutoff = self.state.clock;
        for id in std::mem::take(&mut self.in_flight) {
            let arrival = self.pipeline(id).expect("indexed").arrival_tick;
            self.state.completion_log.push(CompletionRecord {
                pipeline_id: id,
                arrival_tick: arrival,
                terminal_tick: cutoff,
                outcome: Outcome::Unfinished,
                latency: None,
            });
        }
        for &pi in &self.arrival_order[self.next_arrival..] {
            let p = &self.trace[pi];
            self.state.completion_log.push(CompletionRecord {
                pipeline_id: p.pipeline_id,
                arrival_tick: p.arrival_tick,
                terminal_tick: cutoff.max(p.arrival_tick),
                outcome: Outcome::Unfinished,
                latency: None,
            });
        }
        let metrics = compute_metrics(&self.state.completion_log, &self.state.violation_log, cutoff);
        RunOutput {
            metrics,
            completion_log: self.state.completion_log,
            violation_log: self.state.violation_log,
            assignment_log: self.state.assignment_log,
        }
    }
}
