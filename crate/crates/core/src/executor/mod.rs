//! Runs parsed action sequences on simulated devices.
//!
//! [`execute_beam`] drives one beam on one fresh device: it waits out
//! loading screens, scrolls to find targets and, when look-ahead is on,
//! skips a step whose target never shows up if the following step's target
//! can be found instead. Every step is recorded in the [`ExecutionTrace`],
//! including the frames needed to build a tutorial later.
//! [`execute_batch`] fans many (instruction, beam) jobs out over workers.

mod batch;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::device::{DeviceDef, DeviceInstance, Frame, Rect, ScrollDirection};
use crate::matcher::jaccard;
use crate::parser::{token_set, tokenize, ActionKind, ActionTuple, ParseBeam, TokenSet};

pub use batch::{execute_batch, BatchJob};

/// Minimum similarity for an element to count as a step's target.
pub const TARGET_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecConfig {
    /// Unsuccessful actions (waits and scrolls) allowed per step.
    pub attempt_budget: u32,
    pub lookahead: bool,
    /// Beams parsed and executed per instruction.
    pub beams: usize,
    pub workers: usize,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            attempt_budget: 5,
            lookahead: false,
            beams: 3,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// Target never appeared; the next step's target did.
    LookAhead,
    /// Execution stopped at an earlier step.
    NotAttempted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutedStep {
    pub kind: ActionKind,
    pub element_id: String,
    pub element_texts: TokenSet,
    pub screen_before: String,
    pub screen_after: String,
    pub scrolls_used: u32,
    pub waits_used: u32,
    /// Frame at step start, one per scroll, then the frame after acting.
    pub frames: Vec<Frame>,
    pub closeup: Rect,
    pub pre_screen_tokens: TokenSet,
    /// Found by looking ahead past a skipped step.
    #[serde(default)]
    pub via_lookahead: bool,
}

impl ExecutedStep {
    /// Frame on which the action was performed.
    pub fn before_frame(&self) -> &Frame {
        &self.frames[self.frames.len().saturating_sub(2)]
    }

    pub fn after_frame(&self) -> &Frame {
        self.frames.last().expect("executed steps carry frames")
    }

    /// Frames walked through while scrolling to the target, empty if none.
    pub fn scroll_frames(&self) -> &[Frame] {
        if self.scrolls_used == 0 {
            &[]
        } else {
            &self.frames[..self.frames.len() - 1]
        }
    }

    pub fn unsuccessful_actions(&self) -> u32 {
        self.scrolls_used + self.waits_used
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepStatus {
    Executed(ExecutedStep),
    Skipped {
        reason: SkipReason,
        unsuccessful_actions: u32,
    },
    Failed {
        reason: String,
        unsuccessful_actions: u32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step_index: usize,
    #[serde(flatten)]
    pub status: StepStatus,
}

impl StepOutcome {
    pub fn executed(&self) -> Option<&ExecutedStep> {
        match &self.status {
            StepStatus::Executed(step) => Some(step),
            _ => None,
        }
    }

    pub fn is_executed(&self) -> bool {
        self.executed().is_some()
    }

    pub fn is_lookahead_skip(&self) -> bool {
        matches!(
            self.status,
            StepStatus::Skipped {
                reason: SkipReason::LookAhead,
                ..
            }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub instruction_id: String,
    pub beam_index: usize,
    pub beam_score: f64,
    pub outcomes: Vec<StepOutcome>,
    pub reached_final: bool,
    /// Device actions that succeeded: element actions, app launches and scrolls.
    pub actions_executed: u32,
}

impl ExecutionTrace {
    pub fn executed_steps(&self) -> usize {
        self.outcomes.iter().filter(|o| o.is_executed()).count()
    }

    pub fn has_lookahead_skip(&self) -> bool {
        self.outcomes.iter().any(StepOutcome::is_lookahead_skip)
    }

    /// A trace whose first step failed with `reason` and nothing else ran.
    pub fn failed_at_start(
        instruction_id: &str,
        beam_index: usize,
        beam: &ParseBeam,
        reason: String,
    ) -> Self {
        let mut outcomes = vec![StepOutcome {
            step_index: 0,
            status: StepStatus::Failed {
                reason,
                unsuccessful_actions: 0,
            },
        }];
        outcomes.extend((1..beam.tuples.len().max(1)).map(not_attempted));
        ExecutionTrace {
            instruction_id: instruction_id.to_string(),
            beam_index,
            beam_score: beam.score,
            outcomes,
            reached_final: false,
            actions_executed: 0,
        }
    }
}

fn not_attempted(step_index: usize) -> StepOutcome {
    StepOutcome {
        step_index,
        status: StepStatus::Skipped {
            reason: SkipReason::NotAttempted,
            unsuccessful_actions: 0,
        },
    }
}

fn element_score(phrase: &[String], el: &crate::device::Element) -> f64 {
    let text_tokens: Vec<String> = tokenize(&el.text).into_iter().map(|t| t.text).collect();
    if !phrase.is_empty() && text_tokens == phrase {
        return 1.0;
    }
    let phrase_set: TokenSet = phrase.iter().cloned().collect();
    jaccard(&phrase_set, &el.tokens())
}

fn best_match<F>(inst: &DeviceInstance, phrase: &[String], accept: F) -> Option<(String, f64)>
where
    F: Fn(&crate::device::Element) -> bool,
{
    let mut best: Option<(String, f64)> = None;
    for el in inst.visible_elements() {
        if !accept(&el) {
            continue;
        }
        let score = element_score(phrase, &el);
        if score >= TARGET_THRESHOLD && best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((el.id, score));
        }
    }
    best
}

/// Best visible clickable or toggleable element for `phrase`.
///
/// An element whose text tokens equal the phrase scores 1; anything else
/// scores the Jaccard index of the phrase against all the element's text.
/// Scores under [`TARGET_THRESHOLD`] never match; ties go to the topmost.
pub fn find_target(inst: &DeviceInstance, phrase: &[String]) -> Option<String> {
    best_match(inst, phrase, |el| el.actionable()).map(|(id, _)| id)
}

/// Like [`find_target`], but toggle actions only consider toggleable elements.
pub fn find_target_for(inst: &DeviceInstance, phrase: &[String], kind: ActionKind) -> Option<String> {
    if kind.is_toggle() {
        best_match(inst, phrase, |el| el.toggleable).map(|(id, _)| id)
    } else {
        find_target(inst, phrase)
    }
}

/// Why a step could not be performed, with the unsuccessful actions spent.
struct Exhausted {
    reason: String,
    unsuccessful: u32,
}

struct Runner<'a> {
    device: &'a Arc<DeviceDef>,
    inst: Option<DeviceInstance>,
    budget: u32,
    actions: u32,
}

impl Runner<'_> {
    fn closeup(&self, bounds: Rect) -> Rect {
        let pad = self.device.screen_size[0] / 10;
        bounds.expand_clamped(pad, self.device.screen_rect())
    }

    fn open_app(&mut self, tuple: &ActionTuple) -> Result<ExecutedStep, Exhausted> {
        let name = tuple.target();
        let Some((app, _)) = self.device.app_entry(&name) else {
            return Err(Exhausted {
                reason: format!("unknown app \"{name}\""),
                unsuccessful: 0,
            });
        };
        let app = app.to_string();
        let launcher = match &self.inst {
            Some(inst) => inst.clone(),
            None => DeviceInstance::boot(self.device.clone(), None).map_err(|e| Exhausted {
                reason: e.to_string(),
                unsuccessful: 0,
            })?,
        };
        let before = launcher.render();
        let pre_screen_tokens = launcher.snapshot().element_texts;
        let closeup = find_target(&launcher, &tuple.target_tokens())
            .and_then(|id| launcher.on_screen_bounds(&id))
            .map(|b| self.closeup(b))
            .unwrap_or_else(|| self.device.screen_rect());

        let inst = match self.inst.take() {
            Some(mut inst) => {
                inst.open_app(&app).map_err(|e| Exhausted {
                    reason: e.to_string(),
                    unsuccessful: 0,
                })?;
                inst
            }
            None => DeviceInstance::boot(self.device.clone(), Some(&app)).map_err(|e| Exhausted {
                reason: e.to_string(),
                unsuccessful: 0,
            })?,
        };
        self.actions += 1;
        let step = ExecutedStep {
            kind: ActionKind::OpenApp,
            element_id: format!("app:{app}"),
            element_texts: token_set(&app),
            screen_before: before.screen_id.clone(),
            screen_after: inst.screen_id().to_string(),
            scrolls_used: 0,
            waits_used: 0,
            frames: vec![before, inst.render()],
            closeup,
            pre_screen_tokens,
            via_lookahead: false,
        };
        self.inst = Some(inst);
        Ok(step)
    }

    fn perform(&mut self, tuple: &ActionTuple) -> Result<ExecutedStep, Exhausted> {
        if tuple.kind == ActionKind::OpenApp {
            return self.open_app(tuple);
        }
        let budget = self.budget;
        let inst = self.inst.as_mut().expect("device booted before element steps");
        let phrase = tuple.target_tokens();
        let mut attempts = 0;
        let mut waits = 0;
        let mut scrolls = 0;

        while !inst.is_ready() {
            if attempts == budget {
                return Err(Exhausted {
                    reason: format!("screen \"{}\" still loading", inst.screen_id()),
                    unsuccessful: attempts,
                });
            }
            inst.wait();
            attempts += 1;
            waits += 1;
        }

        let mut frames = vec![inst.render()];
        let mut direction = ScrollDirection::Down;
        loop {
            if let Some(id) = find_target_for(inst, &phrase, tuple.kind) {
                let screen = inst.screen();
                let element = screen.element(&id).expect("visible element exists");
                let element_texts = element.tokens();
                let bounds = inst.on_screen_bounds(&id).expect("target is visible");
                let screen_before = inst.screen_id().to_string();
                let pre_screen_tokens = inst.snapshot().element_texts;
                inst.act(&id, tuple.kind).map_err(|e| Exhausted {
                    reason: e.to_string(),
                    unsuccessful: attempts,
                })?;
                frames.push(inst.render());
                let screen_after = inst.screen_id().to_string();
                self.actions += 1;
                let closeup = self.closeup(bounds);
                return Ok(ExecutedStep {
                    kind: tuple.kind,
                    element_id: id,
                    element_texts,
                    screen_before,
                    screen_after,
                    scrolls_used: scrolls,
                    waits_used: waits,
                    frames,
                    closeup,
                    pre_screen_tokens,
                    via_lookahead: false,
                });
            }
            if attempts == budget || !inst.screen().scrollable() {
                return Err(Exhausted {
                    reason: format!(
                        "no element matching \"{}\" on screen \"{}\"",
                        tuple.target(),
                        inst.screen_id()
                    ),
                    unsuccessful: attempts,
                });
            }
            // Bounce at either end of the list so every page gets revisited.
            if !inst.can_scroll(direction) {
                let back = match direction {
                    ScrollDirection::Down => ScrollDirection::Up,
                    ScrollDirection::Up => ScrollDirection::Down,
                };
                if inst.can_scroll(back) {
                    direction = back;
                }
            }
            inst.scroll(direction).expect("screen is scrollable");
            self.actions += 1;
            attempts += 1;
            scrolls += 1;
            frames.push(inst.render());
        }
    }
}

/// Runs one beam on a freshly booted instance of `device`.
pub fn execute_beam(
    instruction_id: &str,
    beam_index: usize,
    device: &Arc<DeviceDef>,
    beam: &ParseBeam,
    cfg: &ExecConfig,
) -> ExecutionTrace {
    let tuples = &beam.tuples;
    if tuples.is_empty() {
        return ExecutionTrace::failed_at_start(instruction_id, beam_index, beam, "empty beam".into());
    }

    let mut runner = Runner {
        device,
        inst: None,
        budget: cfg.attempt_budget,
        actions: 0,
    };
    if tuples[0].kind != ActionKind::OpenApp {
        match DeviceInstance::boot(device.clone(), None) {
            Ok(inst) => runner.inst = Some(inst),
            Err(e) => {
                return ExecutionTrace::failed_at_start(instruction_id, beam_index, beam, e.to_string())
            }
        }
    }

    let mut outcomes: Vec<StepOutcome> = Vec::with_capacity(tuples.len());
    let mut i = 0;
    while i < tuples.len() {
        match runner.perform(&tuples[i]) {
            Ok(step) => {
                outcomes.push(StepOutcome {
                    step_index: i,
                    status: StepStatus::Executed(step),
                });
                i += 1;
            }
            Err(exhausted) => {
                // A failed first launch leaves no device to look ahead on.
                let can_look = cfg.lookahead && i + 1 < tuples.len() && runner.inst.is_some();
                if can_look {
                    if let Ok(mut next) = runner.perform(&tuples[i + 1]) {
                        next.via_lookahead = true;
                        outcomes.push(StepOutcome {
                            step_index: i,
                            status: StepStatus::Skipped {
                                reason: SkipReason::LookAhead,
                                unsuccessful_actions: exhausted.unsuccessful,
                            },
                        });
                        outcomes.push(StepOutcome {
                            step_index: i + 1,
                            status: StepStatus::Executed(next),
                        });
                        i += 2;
                        continue;
                    }
                }
                outcomes.push(StepOutcome {
                    step_index: i,
                    status: StepStatus::Failed {
                        reason: exhausted.reason,
                        unsuccessful_actions: exhausted.unsuccessful,
                    },
                });
                outcomes.extend((i + 1..tuples.len()).map(not_attempted));
                break;
            }
        }
    }

    let reached_final = outcomes.last().is_some_and(StepOutcome::is_executed);
    ExecutionTrace {
        instruction_id: instruction_id.to_string(),
        beam_index,
        beam_score: beam.score,
        outcomes,
        reached_final,
        actions_executed: runner.actions,
    }
}
