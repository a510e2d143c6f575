use super::{Assignment, ExecutorView, FailureNotice, PipelineId, PipelineSpec, Policy, ScheduleResult, Suspension};
use crate::policy::InterpError;
use crate::workload::TraceRng;

/// Emits a random mix of plausible and bogus decisions every tick.
///
/// Roughly two thirds of assignments target a currently ready op on an
/// existing pool; the rest use unknown ids, unknown pools or repeat an op.
/// Counts of everything emitted are kept so callers can reconcile them
/// against the simulator's logs.
pub struct RandomPolicy {
    rng: TraceRng,
    arrived: Vec<PipelineId>,
    max_op_id: u64,
    pub emitted_assignments: usize,
    pub emitted_suspensions: usize,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        RandomPolicy {
            rng: TraceRng::new(seed),
            arrived: Vec::new(),
            max_op_id: 0,
            emitted_assignments: 0,
            emitted_suspensions: 0,
        }
    }

    fn pick<T: Copy>(&mut self, items: &[T]) -> Option<T> {
        if items.is_empty() {
            None
        } else {
            Some(items[self.rng.uniform_int(0, items.len() as u64 - 1) as usize])
        }
    }
}

impl Policy for RandomPolicy {
    fn schedule(
        &mut self,
        _failures: &[FailureNotice],
        arrived: &[&PipelineSpec],
        view: &ExecutorView<'_>,
    ) -> Result<ScheduleResult, InterpError> {
        for p in arrived {
            self.arrived.push(p.pipeline_id);
            self.max_op_id = p.ops.iter().map(|o| o.op_id).fold(self.max_op_id, u64::max);
        }
        let ready: Vec<u64> = self
            .arrived
            .iter()
            .flat_map(|&id| view.ready_ops(id))
            .map(|o| o.op_id)
            .collect();
        let running: Vec<u64> = (0..view.num_pools())
            .flat_map(|pool| view.running(pool))
            .map(|r| r.op_id)
            .collect();
        let pools = view.num_pools() as u64;
        let mut result = ScheduleResult::default();

        for _ in 0..self.rng.uniform_int(0, 2) {
            let op_id = match self.rng.uniform_int(0, 2) {
                0 => self.rng.uniform_int(0, self.max_op_id + 3),
                _ => match self.pick(&running) {
                    Some(id) => id,
                    None => continue,
                },
            };
            result.suspensions.push(Suspension { op_id });
        }
        for _ in 0..self.rng.uniform_int(0, 6) {
            let op_id = match self.rng.uniform_int(0, 5) {
                0 => self.rng.uniform_int(0, self.max_op_id + 3),
                1 => match result.assignments.last() {
                    Some(a) => a.op_id,
                    None => continue,
                },
                _ => match self.pick(&ready) {
                    Some(id) => id,
                    None => continue,
                },
            };
            let pool_id = if self.rng.bernoulli(0.9) {
                self.rng.uniform_int(0, pools - 1)
            } else {
                pools + self.rng.uniform_int(0, 3)
            } as usize;
            result.assignments.push(Assignment { op_id, pool_id });
        }
        self.emitted_assignments += result.assignments.len();
        self.emitted_suspensions += result.suspensions.len();
        Ok(result)
    }
}
