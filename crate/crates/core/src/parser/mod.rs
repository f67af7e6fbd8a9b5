//! Instruction parsing.
//!
//! A small rule grammar turns each sentence of an instruction into zero or
//! more action tuples. Some sentences admit more than one reading (a `>`
//! menu chain can be read as one tap per segment or as a tap on the last
//! segment only; a bare noun sentence can be narration or an implicit tap).
//! [`parse`] runs a width-`k` beam search over those readings and returns
//! the `k` best-scoring action sequences.

mod segment;
mod token;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use segment::{segment, SegmentedInstruction, SegmentedStep};
pub use token::{phrase_string, token_set, tokenize, Span, Token, TokenSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    OpenApp,
    Tap,
    ToggleOn,
    ToggleOff,
}

impl ActionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ActionKind::OpenApp => "open_app",
            ActionKind::Tap => "tap",
            ActionKind::ToggleOn => "toggle_on",
            ActionKind::ToggleOff => "toggle_off",
        }
    }

    pub fn is_toggle(&self) -> bool {
        matches!(self, ActionKind::ToggleOn | ActionKind::ToggleOff)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One parsed step: an operation and the phrase naming its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionTuple {
    pub kind: ActionKind,
    pub target_phrase: Vec<Token>,
    pub source_span: Span,
    /// Rule score this tuple contributed to its beam.
    pub score: f64,
}

impl ActionTuple {
    pub fn target(&self) -> String {
        phrase_string(&self.target_phrase)
    }

    pub fn target_tokens(&self) -> Vec<String> {
        self.target_phrase.iter().map(|t| t.text.clone()).collect()
    }
}

/// A scored candidate action sequence. The score sums the readings of every
/// sentence, narration included, so beams sort by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseBeam {
    pub tuples: Vec<ActionTuple>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("no action found: {diagnostic}")]
    NoActionFound {
        /// First sentence that did not yield an action, if any.
        sentence: Option<String>,
        diagnostic: String,
    },
    #[error("beam count must be at least 1")]
    InvalidBeamCount,
    #[error("tuple {index} span {span} lies outside the instruction text")]
    MisalignedBeam { index: usize, span: Span },
}

/// Rule score for a tuple introduced by a lexicon verb.
pub const VERB_SCORE: f64 = 1.0;
/// Rule score for each `>` chain segment after the first.
pub const CHAIN_SCORE: f64 = 0.5;
/// Rule score for a verb-less sentence read as an implicit tap.
pub const IMPLICIT_TAP_SCORE: f64 = 0.25;
/// Reading score for a sentence taken as narration (no action).
pub const NARRATION_SCORE: f64 = 0.5;

const FILLERS: &[&str] = &["your", "device", "the", "app", "button", "option"];
const OWNERS: &[&str] = &["device", "phone", "tablet"];
const LEADING_ADVERBS: &[&str] = &["then", "next", "now", "first", "finally"];
const CONTROL_WORDS: &[&str] = &["if", "otherwise", "repeat", "unless"];
const FUNCTION_WORDS: &[&str] = &[
    "you", "i", "we", "it", "is", "are", "was", "be", "will", "can", "should", "must", "may",
    "now", "then", "done", "this", "that", "these", "those", "there", "here", "to", "please",
    "not", "hello",
];

/// A sentence of the instruction with its character span (terminator included).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Sentence {
    pub span: Span,
    pub text: String,
}

/// Splits on `.`, `!` and `?`. Abbreviations are not special-cased.
pub(crate) fn split_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let push = |s: usize, e: usize, out: &mut Vec<Sentence>| {
        let mut s = s;
        let mut e = e;
        while s < e && chars[s].is_whitespace() {
            s += 1;
        }
        while e > s && chars[e - 1].is_whitespace() {
            e -= 1;
        }
        let body: String = chars[s..e].iter().collect();
        if body.chars().any(|c| c.is_alphanumeric() || c == '&') {
            out.push(Sentence {
                span: Span::new(s, e),
                text: body,
            });
        }
    };
    let mut i = 0;
    while i < chars.len() {
        if matches!(chars[i], '.' | '!' | '?') {
            let mut end = i + 1;
            while end < chars.len() && matches!(chars[end], '.' | '!' | '?') {
                end += 1;
            }
            push(start, end, &mut out);
            start = end;
            i = end;
        } else {
            i += 1;
        }
    }
    push(start, chars.len(), &mut out);
    out
}

/// Drops filler words from a target phrase. `apps` only counts as filler in
/// trailing position. A possessive like `phone's` arrives as `phone` + `s`
/// and is dropped whole, so `Phone` on its own still names the app.
fn strip_fillers(tokens: &[Token]) -> Vec<Token> {
    let word = |i: usize| tokens.get(i).map(|t| t.text.as_str());
    let possessive = |i: usize| OWNERS.contains(&word(i).unwrap_or("")) && word(i + 1) == Some("s");
    let mut out: Vec<Token> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        if possessive(i) {
            i += 2;
            continue;
        }
        let w = tokens[i].text.as_str();
        let filler = FILLERS.contains(&w) || (w == "apps" && i + 1 == tokens.len());
        if !filler {
            out.push(tokens[i].clone());
        }
        i += 1;
    }
    out
}

#[derive(Debug, Clone)]
struct Reading {
    tuples: Vec<ActionTuple>,
    score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Verb {
    Open,
    Tap,
    Toggle(ActionKind),
}

struct ChainSegment {
    span: Span,
    tokens: Vec<Token>,
}

fn chain_segments(sentence: &Sentence) -> Vec<ChainSegment> {
    let chars: Vec<char> = sentence.text.chars().collect();
    let mut segments = Vec::new();
    let mut seg_start = 0;
    for i in 0..=chars.len() {
        if i == chars.len() || chars[i] == '>' {
            let mut s = seg_start;
            let mut e = i;
            while s < e && chars[s].is_whitespace() {
                s += 1;
            }
            while e > s && (chars[e - 1].is_whitespace() || matches!(chars[e - 1], '.' | '!' | '?'))
            {
                e -= 1;
            }
            let offset = sentence.span.start;
            let raw: String = chars[s..e].iter().collect();
            let tokens = tokenize(&raw)
                .into_iter()
                .map(|t| Token {
                    text: t.text,
                    span: Span::new(t.span.start + offset + s, t.span.end + offset + s),
                })
                .collect::<Vec<_>>();
            if !tokens.is_empty() {
                segments.push(ChainSegment {
                    span: Span::new(offset + s, offset + e),
                    tokens,
                });
            }
            seg_start = i + 1;
        }
    }
    segments
}

/// Readings of one sentence, primary reading first.
fn sentence_readings(sentence: &Sentence, first_action: bool) -> Vec<Reading> {
    let mut segments = chain_segments(sentence);
    let narration = || Reading {
        tuples: Vec::new(),
        score: NARRATION_SCORE,
    };
    if segments.is_empty() {
        return vec![narration()];
    }

    let head = &segments[0].tokens;
    let mut verb_at = 0;
    while verb_at < head.len() && LEADING_ADVERBS.contains(&head[verb_at].text.as_str()) {
        verb_at += 1;
    }
    let verb_word = head.get(verb_at).map(|t| t.text.as_str()).unwrap_or("");
    let mut head_skip = verb_at + 1;
    let all_tokens: Vec<&Token> = segments.iter().flat_map(|s| s.tokens.iter()).collect();
    let verb = match verb_word {
        "open" => {
            let names_app = all_tokens
                .iter()
                .any(|t| t.text == "app" || t.text == "apps");
            if first_action || names_app {
                Some(Verb::Open)
            } else {
                Some(Verb::Tap)
            }
        }
        "tap" | "click" | "press" | "select" | "choose" | "touch" => Some(Verb::Tap),
        "turn" => {
            let after = head.get(verb_at + 1).map(|t| t.text.as_str());
            let last_seg = segments.last().unwrap();
            let last = last_seg.tokens.last().map(|t| t.text.as_str());
            match (after, last) {
                (Some("on"), _) => {
                    head_skip += 1;
                    Some(Verb::Toggle(ActionKind::ToggleOn))
                }
                (Some("off"), _) => {
                    head_skip += 1;
                    Some(Verb::Toggle(ActionKind::ToggleOff))
                }
                (_, Some(word @ ("on" | "off"))) if all_tokens.len() > verb_at + 2 => {
                    let kind = if word == "on" {
                        ActionKind::ToggleOn
                    } else {
                        ActionKind::ToggleOff
                    };
                    segments.last_mut().unwrap().tokens.pop();
                    Some(Verb::Toggle(kind))
                }
                _ => None,
            }
        }
        _ => None,
    };

    let Some(verb) = verb else {
        return noun_readings(sentence, &segments, first_action);
    };

    // Target phrase per chain segment, fillers removed.
    let mut targets: Vec<(Span, Vec<Token>)> = Vec::new();
    for (i, seg) in segments.iter().enumerate() {
        let raw = if i == 0 {
            &seg.tokens[head_skip.min(seg.tokens.len())..]
        } else {
            &seg.tokens[..]
        };
        let phrase = strip_fillers(raw);
        if phrase.is_empty() {
            continue;
        }
        let span = if i == 0 {
            Span::new(sentence.span.start, seg.span.end)
        } else {
            seg.span
        };
        targets.push((span, phrase));
    }
    if targets.is_empty() {
        return vec![narration()];
    }

    let n = targets.len();
    let kind_at = |i: usize| match verb {
        Verb::Open if i == 0 => ActionKind::OpenApp,
        Verb::Toggle(kind) if i + 1 == n => kind,
        _ => ActionKind::Tap,
    };

    if n == 1 {
        let (_, phrase) = targets.pop().unwrap();
        return vec![Reading {
            tuples: vec![ActionTuple {
                kind: kind_at(0),
                target_phrase: phrase,
                source_span: sentence.span,
                score: VERB_SCORE,
            }],
            score: VERB_SCORE,
        }];
    }

    let expanded: Vec<ActionTuple> = targets
        .iter()
        .enumerate()
        .map(|(i, (span, phrase))| ActionTuple {
            kind: kind_at(i),
            target_phrase: phrase.clone(),
            source_span: *span,
            score: if i == 0 { VERB_SCORE } else { CHAIN_SCORE },
        })
        .collect();
    let expanded_score = expanded.iter().map(|t| t.score).sum();

    let last_kind = match verb {
        Verb::Toggle(kind) => kind,
        _ => ActionKind::Tap,
    };
    let (_, last_phrase) = targets.pop().unwrap();
    let final_only = ActionTuple {
        kind: last_kind,
        target_phrase: last_phrase,
        source_span: sentence.span,
        score: VERB_SCORE,
    };

    vec![
        Reading {
            tuples: expanded,
            score: expanded_score,
        },
        Reading {
            tuples: vec![final_only],
            score: VERB_SCORE,
        },
    ]
}

/// A short verb-less sentence such as "Data saver." may name a control the
/// author expects to be tapped. Read as narration first, implicit tap second.
fn noun_readings(sentence: &Sentence, segments: &[ChainSegment], first_action: bool) -> Vec<Reading> {
    let narration = Reading {
        tuples: Vec::new(),
        score: NARRATION_SCORE,
    };
    // Implicit taps only follow an explicit action.
    if first_action || segments.len() != 1 {
        return vec![narration];
    }
    let tokens = &segments[0].tokens;
    let capitalized = sentence
        .text
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase());
    let noun_like = (1..=4).contains(&tokens.len())
        && capitalized
        && tokens
            .iter()
            .all(|t| !FUNCTION_WORDS.contains(&t.text.as_str()));
    let phrase = strip_fillers(tokens);
    if !noun_like || phrase.is_empty() {
        return vec![narration];
    }
    vec![
        narration,
        Reading {
            tuples: vec![ActionTuple {
                kind: ActionKind::Tap,
                target_phrase: phrase,
                source_span: sentence.span,
                score: IMPLICIT_TAP_SCORE,
            }],
            score: IMPLICIT_TAP_SCORE,
        },
    ]
}

/// Parses `text` into at most `k` action sequences, best first.
///
/// Beams are ordered by total score, ties going to the reading generated
/// first (primary readings before alternatives, earlier sentences first).
pub fn parse(text: &str, k: usize) -> Result<Vec<ParseBeam>, ParseError> {
    if k == 0 {
        return Err(ParseError::InvalidBeamCount);
    }
    let sentences = split_sentences(text);

    for sentence in &sentences {
        let words = tokenize(&sentence.text);
        if let Some(word) = words
            .iter()
            .find(|t| CONTROL_WORDS.contains(&t.text.as_str()))
        {
            return Err(ParseError::NoActionFound {
                sentence: Some(sentence.text.clone()),
                diagnostic: format!(
                    "conditional or loop construct `{}` is not supported in \"{}\"",
                    word.text, sentence.text
                ),
            });
        }
    }

    let mut per_sentence = Vec::with_capacity(sentences.len());
    let mut seen_action = false;
    let mut first_unparsed: Option<&Sentence> = None;
    for sentence in &sentences {
        let readings = sentence_readings(sentence, !seen_action);
        if readings[0].tuples.is_empty() {
            first_unparsed.get_or_insert(sentence);
        } else {
            seen_action = true;
        }
        per_sentence.push(readings);
    }

    if !seen_action {
        let diagnostic = match first_unparsed {
            Some(s) => format!("no action verb in \"{}\"", s.text),
            None => "instruction is empty".to_string(),
        };
        return Err(ParseError::NoActionFound {
            sentence: first_unparsed.map(|s| s.text.clone()),
            diagnostic,
        });
    }

    // Partial hypotheses: reading choice per sentence plus running score.
    let mut beams: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 0.0)];
    for readings in &per_sentence {
        let mut next = Vec::with_capacity(beams.len() * readings.len());
        for (choices, score) in &beams {
            for (r, reading) in readings.iter().enumerate() {
                let mut c = choices.clone();
                c.push(r);
                next.push((c, score + reading.score));
            }
        }
        next.sort_by(hypothesis_order);
        next.truncate(k);
        beams = next;
    }

    Ok(beams
        .into_iter()
        .map(|(choices, score)| {
            let tuples: Vec<ActionTuple> = choices
                .iter()
                .zip(&per_sentence)
                .flat_map(|(&c, readings)| readings[c].tuples.iter().cloned())
                .collect();
            ParseBeam { tuples, score }
        })
        .collect())
}

fn hypothesis_order(a: &(Vec<usize>, f64), b: &(Vec<usize>, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(&b.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DATA_SAVER: &str = "Open your device’s settings app. Tap network & internet. Click data usage > data saver. Turn data saver on.";
    const NOTIFICATIONS: &str = "Open your device's Settings app. Tap Apps & notifications. Click Notifications. Tap On lock screen. Click Don't show notifications at all.";

    fn summary(beam: &ParseBeam) -> Vec<(ActionKind, String)> {
        beam.tuples.iter().map(|t| (t.kind, t.target())).collect()
    }

    fn pairs(items: &[(ActionKind, &str)]) -> Vec<(ActionKind, String)> {
        items.iter().map(|(k, s)| (*k, s.to_string())).collect()
    }

    #[test]
    fn data_saver_beams() {
        use ActionKind::*;
        let beams = parse(DATA_SAVER, 3).unwrap();
        assert_eq!(beams.len(), 2);
        assert_eq!(
            summary(&beams[0]),
            pairs(&[
                (OpenApp, "settings"),
                (Tap, "network & internet"),
                (Tap, "data usage"),
                (Tap, "data saver"),
                (ToggleOn, "data saver"),
            ])
        );
        assert_eq!(
            summary(&beams[1]),
            pairs(&[
                (OpenApp, "settings"),
                (Tap, "network & internet"),
                (Tap, "data saver"),
                (ToggleOn, "data saver"),
            ])
        );
        assert_eq!(beams[0].score, 4.5);
        assert_eq!(beams[1].score, 4.0);
    }

    #[test]
    fn notifications_has_five_steps() {
        use ActionKind::*;
        let beams = parse(NOTIFICATIONS, 3).unwrap();
        assert_eq!(beams.len(), 1);
        assert_eq!(
            summary(&beams[0]),
            pairs(&[
                (OpenApp, "settings"),
                (Tap, "apps & notifications"),
                (Tap, "notifications"),
                (Tap, "on lock screen"),
                (Tap, "don t show notifications at all"),
            ])
        );
    }

    #[test]
    fn no_verb_is_rejected() {
        match parse("Hello world.", 3) {
            Err(ParseError::NoActionFound { sentence, .. }) => {
                assert_eq!(sentence.as_deref(), Some("Hello world."))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("", 1), Err(ParseError::NoActionFound { .. })));
    }

    #[test]
    fn zero_beams_rejected() {
        assert_eq!(parse("Tap Battery.", 0), Err(ParseError::InvalidBeamCount));
    }

    #[test]
    fn conditionals_are_rejected() {
        let err = parse("Tap Wi-Fi. If it is off, turn it on.", 3).unwrap_err();
        assert!(matches!(err, ParseError::NoActionFound { .. }));
        assert!(err.to_string().contains("`if`"));
    }

    #[test]
    fn noun_sentence_is_lower_beam() {
        let beams = parse("Tap Display. Dark theme.", 3).unwrap();
        assert_eq!(beams.len(), 2);
        assert_eq!(beams[0].tuples.len(), 1);
        assert_eq!(beams[1].tuples.len(), 2);
        assert_eq!(beams[1].tuples[1].score, IMPLICIT_TAP_SCORE);
        assert_eq!(beams[1].tuples[1].target(), "dark theme");
    }

    #[test]
    fn non_noun_sentence_has_single_reading() {
        let beams = parse("Tap Battery. You are done.", 3).unwrap();
        assert_eq!(beams.len(), 1);
    }

    #[test]
    fn turn_forms() {
        let on = parse("Turn on Wi-Fi.", 1).unwrap();
        assert_eq!(on[0].tuples[0].kind, ActionKind::ToggleOn);
        assert_eq!(on[0].tuples[0].target(), "wi-fi");
        let off = parse("Turn Bluetooth off.", 1).unwrap();
        assert_eq!(off[0].tuples[0].kind, ActionKind::ToggleOff);
        assert_eq!(off[0].tuples[0].target(), "bluetooth");
        assert!(parse("Turn around.", 1).is_err());
    }

    #[test]
    fn later_open_is_a_tap() {
        let beams = parse("Open Settings. Open Notifications.", 1).unwrap();
        assert_eq!(beams[0].tuples[0].kind, ActionKind::OpenApp);
        assert_eq!(beams[0].tuples[1].kind, ActionKind::Tap);
        let beams = parse("Tap Home. Open the Clock app.", 1).unwrap();
        assert_eq!(beams[0].tuples[1].kind, ActionKind::OpenApp);
        assert_eq!(beams[0].tuples[1].target(), "clock");
    }

    #[test]
    fn trailing_apps_is_filler_only_at_end() {
        let beams = parse("Tap See all apps.", 1).unwrap();
        assert_eq!(beams[0].tuples[0].target(), "see all");
        let beams = parse("Tap Apps & notifications.", 1).unwrap();
        assert_eq!(beams[0].tuples[0].target(), "apps & notifications");
    }

    #[test]
    fn possessives_are_dropped() {
        for text in ["Open your phone's Settings app.", "Open the tablet’s settings app.", "Open your device's Settings app."] {
            assert_eq!(parse(text, 1).unwrap()[0].tuples[0].target(), "settings", "{text}");
        }
        let beams = parse("Open Settings. Tap Phone.", 1).unwrap();
        assert_eq!(beams[0].tuples[1].target(), "phone");
    }

    #[test]
    fn sentence_split() {
        let s = split_sentences("Tap A.  Tap B!Tap C? trailing");
        let texts: Vec<_> = s.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["Tap A.", "Tap B!", "Tap C?", "trailing"]);
    }

    #[test]
    fn k_best_is_exact_over_two_chains() {
        let text = "Tap A > B. Tap C > D > E.";
        let beams = parse(text, 4).unwrap();
        let scores: Vec<f64> = beams.iter().map(|b| b.score).collect();
        // expanded/expanded 1.5+2.0, final/expanded 1.0+2.0,
        // expanded/final 1.5+1.0, final/final 1.0+1.0
        assert_eq!(scores, [3.5, 3.0, 2.5, 2.0]);
    }
}
