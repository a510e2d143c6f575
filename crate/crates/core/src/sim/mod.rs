//! Tick-based executor for DAG pipelines on fixed-capacity resource pools.
//!
//! Every tick runs the same fixed sequence:
//!
//! 1. deliver pipelines whose `arrival_tick` equals the clock;
//! 2. fail in-flight pipelines that reached their timeout, killing their running ops;
//! 3. ask the policy for suspensions and assignments;
//! 4. apply suspensions, then assignments, each validated on its own (rejected
//!    entries are skipped and logged as [`ViolationEvent`]s);
//! 5. advance running ops by one tick and retire the ones that reached their duration;
//! 6. advance the clock.
//!
//! Suspended ops restart from zero. The bounded-waiting monitor only records
//! events; it never changes what the policy decided.

mod engine;
mod fuzz;
mod metrics;
mod types;
mod view;


use std::io::{self, Write};

use thiserror::Error;

use crate::policy::InterpError;

pub use engine::{init_sim, run, PoolUsage, RunOutput, RunningOp, SimState, Simulator};
pub use fuzz::RandomPolicy;
pub use metrics::{compute_metrics, nearest_rank, SimMetrics};
pub use types::*;
pub use view::{ExecutorView, OpView, PipelineView, PoolView, RunningHandle};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("policy failed at tick {tick}: {error}")]
    PolicyRuntime { tick: Tick, error: InterpError },
    #[error("simulation already reached max_ticks ({0})")]
    Exhausted(Tick),
}

/// A scheduling policy driven once per tick.
pub trait Policy {
    fn schedule(
        &mut self,
        failures: &[FailureNotice],
        arrived: &[&PipelineSpec],
        view: &ExecutorView<'_>,
    ) -> Result<ScheduleResult, InterpError>;
}

impl<P: Policy + ?Sized> Policy for &mut P {
    fn schedule(
        &mut self,
        failures: &[FailureNotice],
        arrived: &[&PipelineSpec],
        view: &ExecutorView<'_>,
    ) -> Result<ScheduleResult, InterpError> {
        (**self).schedule(failures, arrived, view)
    }
}

/// Writes an assignment log as JSON lines, one `{tick, op_id, pool_id}` per line.
pub fn write_assignment_log<W: Write>(mut out: W, log: &[AssignmentRecord]) -> io::Result<()> {
    for record in log {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
