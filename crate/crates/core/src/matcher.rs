//! Live progress tracking against a tutorial.
//!
//! Each incoming screen snapshot is compared with the screen every tutorial
//! step was performed on. The best match above the threshold becomes the
//! current step; otherwise the tracker stays on the last viewed step.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeSet;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::parser::TokenSet;
use crate::synth::Tutorial;

pub const DEFAULT_THRESHOLD: f64 = 0.2;
/// How long the viewer keeps a step highlighted after a change.
pub const HIGHLIGHT_FADE_MS: u32 = 1000;

/// Intersection over union of two sets; 0 when both are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let common = a.intersection(b).count();
    let union = a.len() + b.len() - common;
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub digest: u64,
    pub step: usize,
    pub similarity: f64,
}

#[derive(Debug, Clone)]
pub struct MatchState {
    tutorial: Arc<Tutorial>,
    last_viewed: usize,
    threshold: f64,
    history: Vec<MatchRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub current_step: usize,
    pub similarity: f64,
    /// Whether the snapshot cleared the threshold.
    pub matched: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightSignal {
    pub scroll_to: usize,
    pub flash: bool,
    pub fade_ms: u32,
}

pub fn highlight_signal(prev_step: usize, current_step: usize) -> HighlightSignal {
    HighlightSignal {
        scroll_to: current_step,
        flash: current_step != prev_step,
        fade_ms: HIGHLIGHT_FADE_MS,
    }
}

fn digest(tokens: &TokenSet) -> u64 {
    let mut h = DefaultHasher::new();
    tokens.hash(&mut h);
    h.finish()
}

impl MatchState {
    pub fn new(tutorial: Arc<Tutorial>, threshold: f64) -> Self {
        MatchState {
            tutorial,
            last_viewed: 0,
            threshold,
            history: Vec::new(),
        }
    }

    pub fn tutorial(&self) -> &Arc<Tutorial> {
        &self.tutorial
    }

    pub fn last_viewed(&self) -> usize {
        self.last_viewed
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn history(&self) -> &[MatchRecord] {
        &self.history
    }

    /// Similarity of `tokens` to each step with visuals: the best over the
    /// step's primary and alternative pre-action screens.
    pub fn step_scores(&self, tokens: &TokenSet) -> Vec<(usize, f64)> {
        self.tutorial
            .steps
            .iter()
            .filter(|s| s.has_visuals)
            .map(|step| {
                let best = step
                    .variants()
                    .map(|v| jaccard(tokens, &v.pre_screen_tokens))
                    .fold(0.0, f64::max);
                (step.index, best)
            })
            .collect()
    }

    /// Resolves the step the user is on from a screen's token set.
    ///
    /// Tied steps prefer the first one at or after the last viewed step.
    pub fn resolve(&mut self, tokens: &TokenSet) -> Resolution {
        let scores = self.step_scores(tokens);
        let best = scores.iter().map(|&(_, s)| s).fold(0.0, f64::max);
        let resolution = if !scores.is_empty() && best >= self.threshold {
            let tied: Vec<usize> = scores
                .iter()
                .filter(|&&(_, s)| s == best)
                .map(|&(i, _)| i)
                .collect();
            let step = tied
                .iter()
                .copied()
                .find(|&i| i >= self.last_viewed)
                .unwrap_or(tied[0]);
            self.last_viewed = step;
            Resolution {
                current_step: step,
                similarity: best,
                matched: true,
            }
        } else {
            Resolution {
                current_step: self.last_viewed,
                similarity: best,
                matched: false,
            }
        };
        self.history.push(MatchRecord {
            digest: digest(tokens),
            step: resolution.current_step,
            similarity: resolution.similarity,
        });
        resolution
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{StepAction, StepVariant, TutorialStep};
    use crate::ActionKind;

    fn set(words: &[&str]) -> TokenSet {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&set(&["turn", "on", "wifi"]), &set(&["turn", "on", "wifi"])), 1.0);
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["d", "e"])), 0.0);
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 0.0);
    }

    fn variant(tokens: &[&str]) -> StepVariant {
        StepVariant {
            action: StepAction {
                kind: ActionKind::Tap,
                element: "e".into(),
                texts: TokenSet::new(),
            },
            overview: String::new(),
            closeup: Default::default(),
            animation: vec![],
            pre_screen_tokens: set(tokens),
            source_beam: 0,
            text: None,
        }
    }

    fn tutorial(screens: &[&[&str]]) -> Arc<Tutorial> {
        Arc::new(Tutorial {
            id: "t".into(),
            source: "t".into(),
            title: None,
            complete: true,
            steps: screens
                .iter()
                .enumerate()
                .map(|(i, s)| TutorialStep {
                    index: i,
                    text: format!("step {i}"),
                    has_visuals: true,
                    primary: Some(variant(s)),
                    alternatives: vec![],
                })
                .collect(),
            provenance: Default::default(),
            assets: Default::default(),
        })
    }

    #[test]
    fn resolves_best_step() {
        let t = tutorial(&[&["home", "clock"], &["settings", "network"], &["wifi", "network", "on"]]);
        let mut state = MatchState::new(t, DEFAULT_THRESHOLD);
        let r = state.resolve(&set(&["wifi", "network", "on"]));
        assert_eq!(r.current_step, 2);
        assert_eq!(r.similarity, 1.0);
        assert_eq!(state.last_viewed(), 2);
    }

    #[test]
    fn fail_safe_keeps_last_viewed() {
        let t = tutorial(&[&["home"], &["settings"], &["wifi"]]);
        let mut state = MatchState::new(t, DEFAULT_THRESHOLD);
        state.resolve(&set(&["settings"]));
        for _ in 0..3 {
            let r = state.resolve(&set(&["zebra", "quux"]));
            assert_eq!(r.current_step, 1);
            assert!(!r.matched);
        }
        assert_eq!(state.last_viewed(), 1);
        assert_eq!(state.history().len(), 4);
    }

    #[test]
    fn ties_prefer_forward_progress() {
        let t = tutorial(&[&["hub"], &["detail"], &["hub"], &["other"]]);
        let mut state = MatchState::new(t, DEFAULT_THRESHOLD);
        assert_eq!(state.resolve(&set(&["hub"])).current_step, 0);
        assert_eq!(state.resolve(&set(&["detail"])).current_step, 1);
        assert_eq!(state.resolve(&set(&["hub"])).current_step, 2);
        assert_eq!(state.resolve(&set(&["other"])).current_step, 3);
        // Nothing tied ahead: fall back to the smallest tied index.
        assert_eq!(state.resolve(&set(&["hub"])).current_step, 0);
    }

    #[test]
    fn highlight() {
        assert_eq!(highlight_signal(2, 3), HighlightSignal { scroll_to: 3, flash: true, fade_ms: 1000 });
        assert!(!highlight_signal(3, 3).flash);
        assert!(!highlight_signal(0, 0).flash);
    }
}
