//! Execution metrics and the beam-search / look-ahead ablation.
//!
//! Per instruction, the trace that counts is the one a tutorial would be
//! built from: the best-scoring beam that reached its final step, or the
//! fallback trace when none did. Steps executed counts only executed
//! outcomes; completion is executed over the total steps of that beam.

use std::fmt::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::Instruction;
use crate::device::DeviceDef;
use crate::executor::{ExecConfig, ExecutionTrace};
use crate::pipeline::{execute, prepare, Prepared, SkipRecord};
use crate::synth::best_incomplete;

/// Trace a tutorial would be built from.
pub fn chosen_trace(traces: &[ExecutionTrace]) -> Option<&ExecutionTrace> {
    traces
        .iter()
        .filter(|t| t.reached_final)
        .min_by(|a, b| {
            b.beam_score
                .partial_cmp(&a.beam_score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.beam_index.cmp(&b.beam_index))
        })
        .or_else(|| best_incomplete(traces))
}

/// `(steps_executed, total_steps)` for one instruction.
pub fn instruction_stats(traces: &[ExecutionTrace]) -> (usize, usize) {
    chosen_trace(traces).map_or((0, 0), |t| (t.executed_steps(), t.outcomes.len()))
}

pub fn completion(steps_executed: usize, total_steps: usize) -> f64 {
    if total_steps == 0 {
        0.0
    } else {
        steps_executed as f64 / total_steps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstructionStats {
    pub id: String,
    pub steps_executed: usize,
    pub total_steps: usize,
    pub completion: f64,
    pub chosen_beam: usize,
    pub first_beam_executed: usize,
    /// The chosen beam is not the first and executed more steps than it.
    pub improved_by_bs: bool,
    /// The chosen beam recovered at least one step by looking ahead.
    pub improved_by_lh: bool,
}

pub fn stats_for(id: &str, traces: &[ExecutionTrace]) -> InstructionStats {
    let chosen = chosen_trace(traces);
    let (steps_executed, total_steps) = instruction_stats(traces);
    let first_beam_executed = traces
        .iter()
        .find(|t| t.beam_index == 0)
        .map_or(0, ExecutionTrace::executed_steps);
    let chosen_beam = chosen.map_or(0, |t| t.beam_index);
    InstructionStats {
        id: id.to_string(),
        steps_executed,
        total_steps,
        completion: completion(steps_executed, total_steps),
        chosen_beam,
        first_beam_executed,
        improved_by_bs: chosen_beam != 0 && steps_executed > first_beam_executed,
        improved_by_lh: chosen.is_some_and(ExecutionTrace::has_lookahead_skip),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config: String,
    pub mean_steps_executed: f64,
    pub completion_rate: f64,
    pub tutorials_improved_by_bs: usize,
    pub tutorials_improved_by_lh: usize,
}

impl MetricsRow {
    pub fn from_stats(config: &str, stats: &[InstructionStats]) -> Self {
        let n = stats.len().max(1) as f64;
        MetricsRow {
            config: config.to_string(),
            mean_steps_executed: stats.iter().map(|s| s.steps_executed as f64).sum::<f64>() / n,
            completion_rate: stats.iter().map(|s| s.completion).sum::<f64>() / n,
            tutorials_improved_by_bs: stats.iter().filter(|s| s.improved_by_bs).count(),
            tutorials_improved_by_lh: stats.iter().filter(|s| s.improved_by_lh).count(),
        }
    }

    /// Same numbers, ignoring the config name.
    pub fn same_metrics(&self, other: &MetricsRow) -> bool {
        self.mean_steps_executed == other.mean_steps_executed
            && self.completion_rate == other.completion_rate
            && self.tutorials_improved_by_bs == other.tutorials_improved_by_bs
            && self.tutorials_improved_by_lh == other.tutorials_improved_by_lh
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationConfig {
    Baseline,
    BeamSearch,
    LookAhead,
    BeamSearchLookAhead,
}

impl AblationConfig {
    pub const ALL: [AblationConfig; 4] = [
        AblationConfig::Baseline,
        AblationConfig::BeamSearch,
        AblationConfig::LookAhead,
        AblationConfig::BeamSearchLookAhead,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AblationConfig::Baseline => "Baseline",
            AblationConfig::BeamSearch => "BS",
            AblationConfig::LookAhead => "LH",
            AblationConfig::BeamSearchLookAhead => "BS+LH",
        }
    }

    /// Executor settings for this configuration; beam count comes from `base`.
    pub fn exec_config(&self, base: &ExecConfig) -> ExecConfig {
        let (beams, lookahead) = match self {
            AblationConfig::Baseline => (1, false),
            AblationConfig::BeamSearch => (base.beams, false),
            AblationConfig::LookAhead => (1, true),
            AblationConfig::BeamSearchLookAhead => (base.beams, true),
        };
        ExecConfig {
            beams,
            lookahead,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigBreakdown {
    pub config: String,
    pub instructions: Vec<InstructionStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<MetricsRow>,
    pub per_instruction: Vec<ConfigBreakdown>,
    pub skipped: Vec<SkipRecord>,
}

impl AblationReport {
    pub fn row(&self, config: AblationConfig) -> &MetricsRow {
        self.rows
            .iter()
            .find(|r| r.config == config.name())
            .expect("every configuration has a row")
    }
}

/// Runs one configuration over already prepared instructions.
pub fn run_config(prepared: &[Prepared], config: AblationConfig, base: &ExecConfig) -> Vec<InstructionStats> {
    let cfg = config.exec_config(base);
    let limited: Vec<Prepared> = prepared.iter().map(|p| p.top(cfg.beams)).collect();
    let traces = execute(&limited, &cfg);
    limited
        .iter()
        .map(|p| stats_for(&p.id, traces.get(&p.id).map(Vec::as_slice).unwrap_or(&[])))
        .collect()
}

/// Runs the four configurations over a corpus.
pub fn ablation(corpus: &[Instruction], devices: &[Arc<DeviceDef>], base: &ExecConfig) -> AblationReport {
    let (prepared, skipped) = prepare(corpus, devices, base.beams.max(1));
    let mut rows = Vec::new();
    let mut per_instruction = Vec::new();
    for config in AblationConfig::ALL {
        let stats = run_config(&prepared, config, base);
        rows.push(MetricsRow::from_stats(config.name(), &stats));
        per_instruction.push(ConfigBreakdown {
            config: config.name().to_string(),
            instructions: stats,
        });
    }
    AblationReport {
        rows,
        per_instruction,
        skipped,
    }
}

/// Plain-text table, one column per configuration.
pub fn render_table(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    let _ = write!(out, "{:<20}", "");
    for r in rows {
        let _ = write!(out, "{:>10}", r.config);
    }
    out.push('\n');
    let mut line = |label: &str, cell: &dyn Fn(&MetricsRow) -> String| {
        let _ = write!(out, "{label:<20}");
        for r in rows {
            let _ = write!(out, "{:>10}", cell(r));
        }
        out.push('\n');
    };
    line("Steps Executed", &|r| format!("{:.2}", r.mean_steps_executed));
    line("Completion Rate", &|r| format!("{:.1}%", r.completion_rate * 100.0));
    line("Improved by BS", &|r| r.tutorials_improved_by_bs.to_string());
    line("Improved by LH", &|r| r.tutorials_improved_by_lh.to_string());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::executor::{ExecutedStep, SkipReason, StepOutcome, StepStatus};
    use crate::device::{Frame, Rect};

    fn executed(i: usize) -> StepOutcome {
        let frame = Frame {
            screen_id: "s".into(),
            scroll_offset: 0,
            drawn: vec![],
            tick: 0,
        };
        StepOutcome {
            step_index: i,
            status: StepStatus::Executed(ExecutedStep {
                kind: crate::ActionKind::Tap,
                element_id: format!("e{i}"),
                element_texts: Default::default(),
                screen_before: "s".into(),
                screen_after: "s".into(),
                scrolls_used: 0,
                waits_used: 0,
                frames: vec![frame.clone(), frame],
                closeup: Rect::default(),
                pre_screen_tokens: Default::default(),
                via_lookahead: false,
            }),
        }
    }

    fn trace(beam: usize, score: f64, executed_n: usize, total: usize) -> ExecutionTrace {
        let mut outcomes: Vec<_> = (0..executed_n).map(executed).collect();
        if executed_n < total {
            outcomes.push(StepOutcome {
                step_index: executed_n,
                status: StepStatus::Failed {
                    reason: "x".into(),
                    unsuccessful_actions: 5,
                },
            });
            outcomes.extend((executed_n + 1..total).map(|i| StepOutcome {
                step_index: i,
                status: StepStatus::Skipped {
                    reason: SkipReason::NotAttempted,
                    unsuccessful_actions: 0,
                },
            }));
        }
        ExecutionTrace {
            instruction_id: "i".into(),
            beam_index: beam,
            beam_score: score,
            reached_final: executed_n == total,
            outcomes,
            actions_executed: executed_n as u32,
        }
    }

    #[test]
    fn three_of_five_is_sixty_percent() {
        let (done, total) = instruction_stats(&[trace(0, 1.0, 3, 5)]);
        assert_eq!((done, total), (3, 5));
        assert_eq!(completion(done, total), 0.6);
    }

    #[test]
    fn all_executed() {
        let (done, total) = instruction_stats(&[trace(0, 1.0, 4, 4)]);
        assert_eq!(completion(done, total), 1.0);
    }

    #[test]
    fn best_of_beams() {
        let traces = [trace(0, 3.0, 1, 5), trace(1, 2.5, 4, 4), trace(2, 2.0, 2, 5)];
        assert_eq!(instruction_stats(&traces).0, 4);
        let stats = stats_for("i", &traces);
        assert!(stats.improved_by_bs);
        assert_eq!(stats.first_beam_executed, 1);
    }

    #[test]
    fn table_layout() {
        let rows = [
            MetricsRow {
                config: "Baseline".into(),
                mean_steps_executed: 2.82,
                completion_rate: 0.671,
                tutorials_improved_by_bs: 0,
                tutorials_improved_by_lh: 0,
            },
            MetricsRow {
                config: "BS+LH".into(),
                mean_steps_executed: 3.35,
                completion_rate: 0.809,
                tutorials_improved_by_bs: 39,
                tutorials_improved_by_lh: 41,
            },
        ];
        let table = render_table(&rows);
        assert!(table.contains("Completion Rate          67.1%     80.9%"));
        assert!(table.contains("Steps Executed            2.82      3.35"));
    }
}
