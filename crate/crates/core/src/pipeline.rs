//! End-to-end pipeline: parse, segment, execute, synthesize.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{device_for, Instruction};
use crate::device::DeviceDef;
use crate::executor::{execute_batch, BatchJob, ExecConfig, ExecutionTrace};
use crate::parser::{parse, segment, ParseBeam, SegmentedInstruction};
use crate::synth::{merge_beams, Tutorial};

/// An instruction ready to execute.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub id: String,
    pub text: String,
    pub device: Arc<DeviceDef>,
    pub beams: Vec<ParseBeam>,
    /// Segmentation of each beam, same order as `beams`.
    pub segmented: Vec<SegmentedInstruction>,
}

impl Prepared {
    /// The same instruction restricted to its first `k` beams.
    pub fn top(&self, k: usize) -> Prepared {
        Prepared {
            beams: self.beams.iter().take(k).cloned().collect(),
            segmented: self.segmented.iter().take(k).cloned().collect(),
            ..self.clone()
        }
    }
}

/// An instruction that dropped out before execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct InstructionResult {
    pub id: String,
    pub traces: Vec<ExecutionTrace>,
    pub tutorial: Tutorial,
}

/// Parses and segments every instruction. Failures are returned as skip
/// records and never affect other instructions.
pub fn prepare(
    corpus: &[Instruction],
    devices: &[Arc<DeviceDef>],
    k: usize,
) -> (Vec<Prepared>, Vec<SkipRecord>) {
    let mut ready = Vec::new();
    let mut skipped = Vec::new();
    for ins in corpus {
        let skip = |reason: String| SkipRecord {
            id: ins.id.clone(),
            reason,
        };
        let device = match device_for(ins, devices) {
            Ok(d) => d,
            Err(e) => {
                skipped.push(skip(e.to_string()));
                continue;
            }
        };
        let beams = match parse(&ins.text, k) {
            Ok(b) => b,
            Err(e) => {
                skipped.push(skip(e.to_string()));
                continue;
            }
        };
        let segmented: Result<Vec<_>, _> = beams.iter().map(|b| segment(&ins.text, b)).collect();
        match segmented {
            Ok(segmented) => ready.push(Prepared {
                id: ins.id.clone(),
                text: ins.text.clone(),
                device,
                beams,
                segmented,
            }),
            Err(e) => skipped.push(skip(e.to_string())),
        }
    }
    (ready, skipped)
}

/// Executes all beams of all instructions, grouped per instruction id.
pub fn execute(prepared: &[Prepared], cfg: &ExecConfig) -> BTreeMap<String, Vec<ExecutionTrace>> {
    let jobs: Vec<BatchJob> = prepared
        .iter()
        .map(|p| BatchJob {
            instruction_id: p.id.clone(),
            device: p.device.clone(),
            beams: p.beams.clone(),
        })
        .collect();
    let mut grouped: BTreeMap<String, Vec<ExecutionTrace>> = BTreeMap::new();
    for trace in execute_batch(&jobs, cfg) {
        grouped.entry(trace.instruction_id.clone()).or_default().push(trace);
    }
    grouped
}

/// Runs execution and synthesis for prepared instructions.
pub fn run(prepared: &[Prepared], cfg: &ExecConfig) -> (Vec<InstructionResult>, Vec<SkipRecord>) {
    let mut traces = execute(prepared, cfg);
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    for p in prepared {
        let t = traces.remove(&p.id).unwrap_or_default();
        match merge_beams(&t, &p.segmented, p.device.screen_size) {
            Ok(tutorial) => results.push(InstructionResult {
                id: p.id.clone(),
                traces: t,
                tutorial,
            }),
            Err(e) => skipped.push(SkipRecord {
                id: p.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    (results, skipped)
}
