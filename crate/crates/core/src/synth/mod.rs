//! Tutorial synthesis from execution traces.
//!
//! Beams that did not reach their final step are dropped. The best
//! surviving beam is the spine of the tutorial; the other survivors are
//! aligned to it by longest common subsequence over executed actions, and
//! whatever does not line up becomes a ranked alternative on the nearest
//! spine step. When no beam completes, [`fallback`] keeps the visuals of
//! the steps that did execute and shows the rest as text.

mod bundle;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::device::{Frame, Rect, SvgView};
use crate::executor::{ExecutedStep, ExecutionTrace, StepStatus};
use crate::parser::{ActionKind, SegmentedInstruction, TokenSet};

pub use bundle::write_bundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepAction {
    pub kind: ActionKind,
    pub element: String,
    pub texts: TokenSet,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Closeup {
    #[serde(rename = "ref")]
    pub asset: String,
    pub crop: Rect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepVariant {
    pub action: StepAction,
    /// Full-screen frame with the close-up region outlined.
    pub overview: String,
    pub closeup: Closeup,
    /// Frames of the scroll that led to the target, empty without scrolling.
    pub animation: Vec<String>,
    pub pre_screen_tokens: TokenSet,
    pub source_beam: usize,
    /// Own step text, kept for alternatives from non-spine beams.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TutorialStep {
    pub index: usize,
    pub text: String,
    pub has_visuals: bool,
    /// `None` for text-only steps.
    pub primary: Option<StepVariant>,
    pub alternatives: Vec<StepVariant>,
}

impl TutorialStep {
    pub fn variants(&self) -> impl Iterator<Item = &StepVariant> {
        self.primary.iter().chain(self.alternatives.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedNote {
    pub beam: usize,
    pub tuple_index: usize,
    pub text: String,
    /// Tutorial step whose text block absorbed this step's text.
    pub merged_into: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlternativeNote {
    pub step: usize,
    pub beam: usize,
    pub tuple_index: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    #[default]
    Merged,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MergeReport {
    pub mode: MergeMode,
    /// Beam the step sequence and text come from.
    pub spine_beam: Option<usize>,
    pub merged_beams: Vec<usize>,
    pub discarded_beams: Vec<usize>,
    pub skipped_steps: Vec<SkippedNote>,
    pub alternatives: Vec<AlternativeNote>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    /// Score of every executed beam, indexed by beam.
    pub beam_scores: Vec<f64>,
    pub merge_report: MergeReport,
}

/// Frame plus how to draw it; written out as SVG by [`write_bundle`].
#[derive(Debug, Clone, PartialEq)]
pub struct Asset {
    pub frame: Frame,
    pub screen_size: [i32; 2],
    pub view: SvgView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tutorial {
    pub id: String,
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    pub complete: bool,
    pub steps: Vec<TutorialStep>,
    pub provenance: Provenance,
    /// Images referenced by the steps, keyed by bundle-relative path.
    #[serde(skip)]
    pub assets: BTreeMap<String, Asset>,
}

impl Tutorial {
    pub fn asset_refs(&self) -> Vec<&str> {
        let mut refs = Vec::new();
        for v in self.steps.iter().flat_map(|s| s.variants()) {
            refs.push(v.overview.as_str());
            refs.push(v.closeup.asset.as_str());
            refs.extend(v.animation.iter().map(String::as_str));
        }
        refs
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("no traces to merge")]
    EmptyInput,
    #[error("traces belong to different instructions: `{0}` and `{1}`")]
    MixedInstructions(String, String),
    #[error("no segmentation for beam {0}")]
    MissingSegmentation(usize),
    #[error("cannot write bundle {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

type Key = (String, String, ActionKind);

fn key_of(step: &ExecutedStep) -> Key {
    (step.screen_before.clone(), step.element_id.clone(), step.kind)
}

struct VariantBuilder<'a> {
    screen_size: [i32; 2],
    assets: &'a mut BTreeMap<String, Asset>,
}

impl VariantBuilder<'_> {
    fn build(&mut self, beam: usize, tuple_index: usize, step: &ExecutedStep, text: Option<String>) -> StepVariant {
        let stem = format!("assets/b{beam}_s{tuple_index}");
        let before = step.before_frame();
        let overview = format!("{stem}_overview.svg");
        let closeup = format!("{stem}_closeup.svg");
        self.assets.insert(
            overview.clone(),
            Asset {
                frame: before.clone(),
                screen_size: self.screen_size,
                view: SvgView {
                    highlight: Some(step.closeup),
                    crop: None,
                },
            },
        );
        self.assets.insert(
            closeup.clone(),
            Asset {
                frame: before.clone(),
                screen_size: self.screen_size,
                view: SvgView {
                    highlight: None,
                    crop: Some(step.closeup),
                },
            },
        );
        let animation = step
            .scroll_frames()
            .iter()
            .enumerate()
            .map(|(n, frame)| {
                let name = format!("{stem}_scroll{n}.svg");
                self.assets.insert(
                    name.clone(),
                    Asset {
                        frame: frame.clone(),
                        screen_size: self.screen_size,
                        view: SvgView::default(),
                    },
                );
                name
            })
            .collect();
        StepVariant {
            action: StepAction {
                kind: step.kind,
                element: step.element_id.clone(),
                texts: step.element_texts.clone(),
            },
            overview,
            closeup: Closeup {
                asset: closeup,
                crop: step.closeup,
            },
            animation,
            pre_screen_tokens: step.pre_screen_tokens.clone(),
            source_beam: beam,
            text,
        }
    }
}

/// Step text, absorbing any skipped steps since `pending_from`.
fn step_text(seg: &SegmentedInstruction, pending_from: &mut Option<usize>, index: usize) -> String {
    match pending_from.take() {
        Some(first) => seg.text_range(first, index),
        None => seg.text(index).to_string(),
    }
}

fn beam_scores(traces: &[ExecutionTrace]) -> Vec<f64> {
    let n = traces.iter().map(|t| t.beam_index + 1).max().unwrap_or(0);
    let mut scores = vec![0.0; n];
    for t in traces {
        scores[t.beam_index] = t.beam_score;
    }
    scores
}

/// Longest common subsequence of two key sequences as matched index pairs.
fn lcs_pairs(a: &[Key], b: &[Key]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut table = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[i][j] = if a[i] == b[j] {
                table[i + 1][j + 1] + 1
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if table[i + 1][j] >= table[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

fn segmentation(segmented: &[SegmentedInstruction], beam: usize) -> Result<&SegmentedInstruction, SynthError> {
    segmented.get(beam).ok_or(SynthError::MissingSegmentation(beam))
}

fn check_input(traces: &[ExecutionTrace]) -> Result<(), SynthError> {
    let first = traces.first().ok_or(SynthError::EmptyInput)?;
    if let Some(other) = traces.iter().find(|t| t.instruction_id != first.instruction_id) {
        return Err(SynthError::MixedInstructions(
            first.instruction_id.clone(),
            other.instruction_id.clone(),
        ));
    }
    Ok(())
}

fn by_score(a: &&ExecutionTrace, b: &&ExecutionTrace) -> std::cmp::Ordering {
    b.beam_score
        .partial_cmp(&a.beam_score)
        .unwrap_or(std::cmp::Ordering::Equal)
        .then(a.beam_index.cmp(&b.beam_index))
}

/// Trace a fallback tutorial is built from: most executed steps, then the
/// higher beam score.
pub fn best_incomplete(traces: &[ExecutionTrace]) -> Option<&ExecutionTrace> {
    let mut sorted: Vec<&ExecutionTrace> = traces.iter().collect();
    sorted.sort_by(|a, b| {
        b.executed_steps()
            .cmp(&a.executed_steps())
            .then_with(|| by_score(a, b))
    });
    sorted.first().copied()
}

/// Merges the traces of one instruction into a tutorial.
///
/// `segmented[b]` must be the segmentation of beam `b`.
pub fn merge_beams(
    traces: &[ExecutionTrace],
    segmented: &[SegmentedInstruction],
    screen_size: [i32; 2],
) -> Result<Tutorial, SynthError> {
    check_input(traces)?;
    let mut survivors: Vec<&ExecutionTrace> = traces.iter().filter(|t| t.reached_final).collect();
    survivors.sort_by(by_score);
    let discarded: Vec<usize> = {
        let mut d: Vec<usize> = traces
            .iter()
            .filter(|t| !t.reached_final)
            .map(|t| t.beam_index)
            .collect();
        d.sort_unstable();
        d
    };

    let Some(&spine) = survivors.first() else {
        let best = best_incomplete(traces).ok_or(SynthError::EmptyInput)?;
        let mut tutorial = fallback(best, segmentation(segmented, best.beam_index)?, screen_size);
        tutorial.provenance.beam_scores = beam_scores(traces);
        tutorial.provenance.merge_report.discarded_beams = discarded;
        return Ok(tutorial);
    };

    let mut assets = BTreeMap::new();
    let mut builder = VariantBuilder {
        screen_size,
        assets: &mut assets,
    };
    let mut report = MergeReport {
        mode: MergeMode::Merged,
        spine_beam: Some(spine.beam_index),
        merged_beams: survivors.iter().map(|t| t.beam_index).collect(),
        discarded_beams: discarded,
        ..MergeReport::default()
    };

    let spine_seg = segmentation(segmented, spine.beam_index)?;
    let mut steps: Vec<TutorialStep> = Vec::new();
    let mut spine_keys: Vec<Key> = Vec::new();
    let mut pending: Option<usize> = None;
    let mut pending_notes: Vec<SkippedNote> = Vec::new();
    for outcome in &spine.outcomes {
        let text = spine_seg.text(outcome.step_index);
        match &outcome.status {
            StepStatus::Executed(step) => {
                let index = steps.len();
                for mut note in pending_notes.drain(..) {
                    note.merged_into = index;
                    report.skipped_steps.push(note);
                }
                let primary = builder.build(spine.beam_index, outcome.step_index, step, None);
                spine_keys.push(key_of(step));
                steps.push(TutorialStep {
                    index,
                    text: step_text(spine_seg, &mut pending, outcome.step_index),
                    has_visuals: true,
                    primary: Some(primary),
                    alternatives: Vec::new(),
                });
            }
            _ => {
                pending.get_or_insert(outcome.step_index);
                pending_notes.push(SkippedNote {
                    beam: spine.beam_index,
                    tuple_index: outcome.step_index,
                    text: text.to_string(),
                    merged_into: 0,
                });
            }
        }
    }

    // Keys already shown at each spine position.
    let mut shown: Vec<Vec<Key>> = spine_keys.iter().map(|k| vec![k.clone()]).collect();

    for other in survivors.iter().skip(1) {
        let seg = segmentation(segmented, other.beam_index)?;
        let executed: Vec<(usize, &ExecutedStep)> = other
            .outcomes
            .iter()
            .filter_map(|o| o.executed().map(|s| (o.step_index, s)))
            .collect();
        let keys: Vec<Key> = executed.iter().map(|(_, s)| key_of(s)).collect();
        let pairs = lcs_pairs(&spine_keys, &keys);

        // Gaps between matched anchors, including before the first and after the last.
        let mut bounds: Vec<(usize, usize)> = vec![(0, 0)];
        bounds.extend(pairs.iter().map(|&(i, j)| (i + 1, j + 1)));
        let mut ends: Vec<(usize, usize)> = pairs.clone();
        ends.push((spine_keys.len(), keys.len()));

        for (&(s_start, b_start), &(s_end, b_end)) in bounds.iter().zip(&ends) {
            let spine_gap: Vec<usize> = (s_start..s_end).collect();
            for (n, b_pos) in (b_start..b_end).enumerate() {
                let target = if spine_gap.is_empty() {
                    // Extra step in this beam: attach to the next spine step.
                    s_end.min(steps.len().saturating_sub(1))
                } else {
                    spine_gap[n.min(spine_gap.len() - 1)]
                };
                let key = &keys[b_pos];
                if shown[target].contains(key) {
                    continue;
                }
                shown[target].push(key.clone());
                let (tuple_index, step) = executed[b_pos];
                let text = seg.text(tuple_index).to_string();
                report.alternatives.push(AlternativeNote {
                    step: target,
                    beam: other.beam_index,
                    tuple_index,
                    text: text.clone(),
                });
                let variant = builder.build(other.beam_index, tuple_index, step, Some(text));
                steps[target].alternatives.push(variant);
            }
        }
    }

    Ok(Tutorial {
        id: spine.instruction_id.clone(),
        source: spine.instruction_id.clone(),
        title: None,
        complete: steps.iter().all(|s| s.has_visuals),
        steps,
        provenance: Provenance {
            beam_scores: beam_scores(traces),
            merge_report: report,
        },
        assets,
    })
}

/// Tutorial from a trace that did not finish: executed steps keep their
/// visuals, the rest are text only.
pub fn fallback(best: &ExecutionTrace, segmented: &SegmentedInstruction, screen_size: [i32; 2]) -> Tutorial {
    let mut assets = BTreeMap::new();
    let mut builder = VariantBuilder {
        screen_size,
        assets: &mut assets,
    };
    let mut report = MergeReport {
        mode: MergeMode::Fallback,
        spine_beam: Some(best.beam_index),
        ..MergeReport::default()
    };
    let mut steps: Vec<TutorialStep> = Vec::new();
    let mut pending: Option<usize> = None;
    let mut pending_notes: Vec<SkippedNote> = Vec::new();

    for outcome in &best.outcomes {
        let text = segmented.text(outcome.step_index);
        let (primary, has_visuals) = match &outcome.status {
            StepStatus::Skipped {
                reason: crate::executor::SkipReason::LookAhead,
                ..
            } => {
                pending.get_or_insert(outcome.step_index);
                pending_notes.push(SkippedNote {
                    beam: best.beam_index,
                    tuple_index: outcome.step_index,
                    text: text.to_string(),
                    merged_into: 0,
                });
                continue;
            }
            StepStatus::Executed(step) => (
                Some(builder.build(best.beam_index, outcome.step_index, step, None)),
                true,
            ),
            _ => (None, false),
        };
        let index = steps.len();
        for mut note in pending_notes.drain(..) {
            note.merged_into = index;
            report.skipped_steps.push(note);
        }
        steps.push(TutorialStep {
            index,
            text: step_text(segmented, &mut pending, outcome.step_index),
            has_visuals,
            primary,
            alternatives: Vec::new(),
        });
    }

    Tutorial {
        id: best.instruction_id.clone(),
        source: best.instruction_id.clone(),
        title: None,
        complete: false,
        steps,
        provenance: Provenance {
            beam_scores: beam_scores(std::slice::from_ref(best)),
            merge_report: report,
        },
        assets,
    }
}
