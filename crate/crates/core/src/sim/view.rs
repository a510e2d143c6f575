use super::engine::Simulator;
use super::types::*;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolView {
    pub pool_id: PoolId,
    pub cpu_capacity: u32,
    pub mem_capacity: u32,
    pub cpu_free: u32,
    pub mem_free: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpView {
    pub op_id: OpId,
    pub pipeline_id: PipelineId,
    pub workload_class: WorkloadClass,
    pub cpu_req: u32,
    pub mem_req: u32,
    pub duration_hint: Tick,
    pub deps: Vec<OpId>,
    pub status: OpStatus,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PipelineView {
    pub pipeline_id: PipelineId,
    pub workload_class: WorkloadClass,
    pub arrival_tick: Tick,
    pub timeout: Tick,
    pub ops: Vec<OpView>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunningHandle {
    pub op_id: OpId,
    pub pipeline_id: PipelineId,
    pub pool_id: PoolId,
    pub workload_class: WorkloadClass,
    pub cpu_req: u32,
    pub mem_req: u32,
    pub duration_hint: Tick,
    pub elapsed: Tick,
}

/// Read-only window onto the executor handed to policies.
#[derive(Clone, Copy)]
pub struct ExecutorView<'a> {
    sim: &'a Simulator<'a>,
}

impl<'a> ExecutorView<'a> {
    pub(crate) fn new(sim: &'a Simulator<'a>) -> Self {
        ExecutorView { sim }
    }

    pub fn clock(&self) -> Tick {
        self.sim.state().clock
    }

    pub fn num_pools(&self) -> usize {
        self.sim.config().pools.len()
    }

    pub fn pool(&self, pool_id: PoolId) -> Option<PoolView> {
        let cfg = self.sim.config().pools.get(pool_id)?;
        let usage = self.sim.state().pool_usage[pool_id];
        Some(PoolView {
            pool_id,
            cpu_capacity: cfg.cpu_capacity,
            mem_capacity: cfg.mem_capacity,
            cpu_free: cfg.cpu_capacity - usage.cpu_used,
            mem_free: cfg.mem_capacity - usage.mem_used,
        })
    }

    /// Ops running on `pool_id`, ordered by op id.
    pub fn running(&self, pool_id: PoolId) -> Vec<RunningHandle> {
        self.sim
            .state()
            .running
            .iter()
            .filter(|(_, run)| run.pool_id == pool_id)
            .map(|(&op_id, run)| {
                let op = self.sim.op(op_id).expect("running op is indexed");
                RunningHandle {
                    op_id,
                    pipeline_id: op.pipeline_id,
                    pool_id,
                    workload_class: self.sim.op_class(op_id).expect("indexed"),
                    cpu_req: op.cpu_req,
                    mem_req: op.mem_req,
                    duration_hint: op.duration,
                    elapsed: run.elapsed,
                }
            })
            .collect()
    }

    pub fn pipeline_status(&self, pipeline_id: PipelineId) -> Option<PipelineStatus> {
        self.sim.state().pipeline_status.get(&pipeline_id).copied()
    }

    pub fn op_status(&self, op_id: OpId) -> Option<OpStatus> {
        self.sim.state().op_status.get(&op_id).copied()
    }

    /// Ready ops of an in-flight pipeline, in the pipeline's op order.
    pub fn ready_ops(&self, pipeline_id: PipelineId) -> Vec<OpView> {
        if self.pipeline_status(pipeline_id) != Some(PipelineStatus::InFlight) {
            return Vec::new();
        }
        let Some(pipeline) = self.sim.pipeline(pipeline_id) else {
            return Vec::new();
        };
        pipeline
            .ops
            .iter()
            .filter(|op| self.op_status(op.op_id) == Some(OpStatus::Ready))
            .map(|op| self.op_view(op, pipeline.workload_class))
            .collect()
    }

    pub fn pipeline_view(&self, pipeline: &PipelineSpec) -> PipelineView {
        PipelineView {
            pipeline_id: pipeline.pipeline_id,
            workload_class: pipeline.workload_class,
            arrival_tick: pipeline.arrival_tick,
            timeout: pipeline.timeout,
            ops: pipeline
                .ops
                .iter()
                .map(|op| self.op_view(op, pipeline.workload_class))
                .collect(),
        }
    }

    fn op_view(&self, op: &OpSpec, class: WorkloadClass) -> OpView {
        OpView {
            op_id: op.op_id,
            pipeline_id: op.pipeline_id,
            workload_class: class,
            cpu_req: op.cpu_req,
            mem_req: op.mem_req,
            duration_hint: op.duration,
            deps: op.deps.clone(),
            status: self.op_status(op.op_id).unwrap_or(OpStatus::Waiting),
        }
    }
}
