use crate::sim::{
    Assignment, ExecutorView, FailureNotice, PipelineId, PipelineSpec, PipelineStatus, Policy, ScheduleResult,
};

use super::InterpError;

/// Queue of pipelines in arrival order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FifoState {
    pub waiting_queue: Vec<PipelineId>,
}

/// Reference FIFO: same decisions as the shipped `fifo.pol`.
///
/// Ready ops are taken oldest pipeline first, pipeline op order within a
/// pipeline. Pools are filled in index order; each pool takes every candidate
/// that still fits (first fit), so a blocked op never holds back those behind it.
pub fn native_fifo(
    state: &mut FifoState,
    _failures: &[FailureNotice],
    new_pipelines: &[&PipelineSpec],
    view: &ExecutorView<'_>,
) -> ScheduleResult {
    state.waiting_queue.extend(new_pipelines.iter().map(|p| p.pipeline_id));
    state
        .waiting_queue
        .retain(|&id| view.pipeline_status(id) == Some(PipelineStatus::InFlight));

    let mut candidates: Vec<_> = state.waiting_queue.iter().flat_map(|&id| view.ready_ops(id)).collect();
    let mut result = ScheduleResult::default();
    for pool_id in 0..view.num_pools() {
        let pool = view.pool(pool_id).expect("pool index in range");
        let (mut cpu, mut mem) = (pool.cpu_free, pool.mem_free);
        candidates.retain(|op| {
            if op.cpu_req <= cpu && op.mem_req <= mem {
                result.assignments.push(Assignment {
                    op_id: op.op_id,
                    pool_id,
                });
                cpu -= op.cpu_req;
                mem -= op.mem_req;
                false
            } else {
                true
            }
        });
    }
    result
}

#[derive(Clone, Debug, Default)]
pub struct NativeFifo {
    state: FifoState,
}

impl NativeFifo {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Policy for NativeFifo {
    fn schedule(
        &mut self,
        failures: &[FailureNotice],
        arrived: &[&PipelineSpec],
        view: &ExecutorView<'_>,
    ) -> Result<ScheduleResult, InterpError> {
        Ok(native_fifo(&mut self.state, failures, arrived, view))
    }
}
