use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use super::{execute_beam, ExecConfig, ExecutionTrace};
use crate::device::DeviceDef;
use crate::parser::ParseBeam;

/// All beams of one instruction, bound to the device they run on.
#[derive(Debug, Clone)]
pub struct BatchJob {
    pub instruction_id: String,
    pub device: Arc<DeviceDef>,
    pub beams: Vec<ParseBeam>,
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    payload
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| payload.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".to_string())
}

fn run_one(job: &BatchJob, beam_index: usize, cfg: &ExecConfig) -> ExecutionTrace {
    let beam = &job.beams[beam_index];
    catch_unwind(AssertUnwindSafe(|| {
        execute_beam(&job.instruction_id, beam_index, &job.device, beam, cfg)
    }))
    .unwrap_or_else(|payload| {
        ExecutionTrace::failed_at_start(
            &job.instruction_id,
            beam_index,
            beam,
            format!("executor fault: {}", panic_message(payload.as_ref())),
        )
    })
}

#[cfg(feature = "parallel")]
fn run_all(units: &[(usize, usize)], jobs: &[BatchJob], cfg: &ExecConfig) -> Vec<ExecutionTrace> {
    use rayon::prelude::*;

    if cfg.workers <= 1 {
        return run_sequential(units, jobs, cfg);
    }
    match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(pool) => pool.install(|| {
            units
                .par_iter()
                .map(|&(j, b)| run_one(&jobs[j], b, cfg))
                .collect()
        }),
        Err(_) => run_sequential(units, jobs, cfg),
    }
}

#[cfg(not(feature = "parallel"))]
fn run_all(units: &[(usize, usize)], jobs: &[BatchJob], cfg: &ExecConfig) -> Vec<ExecutionTrace> {
    run_sequential(units, jobs, cfg)
}

fn run_sequential(units: &[(usize, usize)], jobs: &[BatchJob], cfg: &ExecConfig) -> Vec<ExecutionTrace> {
    units
        .iter()
        .map(|&(j, b)| run_one(&jobs[j], b, cfg))
        .collect()
}

/// Executes every beam of every job, each on its own freshly booted device.
///
/// Output is sorted by instruction id, then beam index, so it does not
/// depend on `cfg.workers`. A job that panics becomes a trace failed at
/// step 0 instead of aborting the batch.
pub fn execute_batch(jobs: &[BatchJob], cfg: &ExecConfig) -> Vec<ExecutionTrace> {
    let units: Vec<(usize, usize)> = jobs
        .iter()
        .enumerate()
        .flat_map(|(j, job)| (0..job.beams.len()).map(move |b| (j, b)))
        .collect();
    let mut traces = run_all(&units, jobs, cfg);
    traces.sort_by(|a, b| {
        a.instruction_id
            .cmp(&b.instruction_id)
            .then(a.beam_index.cmp(&b.beam_index))
    });
    traces
}
