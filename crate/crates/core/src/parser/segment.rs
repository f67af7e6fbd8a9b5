use serde::{Deserialize, Serialize};

use super::{split_sentences, ParseBeam, ParseError, Span};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentedStep {
    pub text: String,
    pub span: Span,
    pub tuple_index: usize,
}

/// Instruction text split into one text block per tuple of a beam.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SegmentedInstruction {
    pub steps: Vec<SegmentedStep>,
    /// The instruction the spans point into.
    #[serde(default)]
    pub source: String,
}

impl SegmentedInstruction {
    pub fn text(&self, index: usize) -> &str {
        self.steps.get(index).map(|s| s.text.as_str()).unwrap_or("")
    }

    /// Text of steps `first..=last` as one block, quoted from the source
    /// when it is available so separators like `>` survive.
    pub fn text_range(&self, first: usize, last: usize) -> String {
        match (self.steps.get(first), self.steps.get(last)) {
            (Some(a), Some(b)) if !self.source.is_empty() && a.span.start <= b.span.end => {
                Span::new(a.span.start, b.span.end).slice(&self.source).trim().to_string()
            }
            _ => (first..=last)
                .map(|i| self.text(i))
                .filter(|t| !t.is_empty())
                .collect::<Vec<_>>()
                .join(" "),
        }
    }
}

/// Splits `text` into per-step text blocks aligned with `beam`.
///
/// A sentence with one tuple becomes that tuple's block. A sentence with
/// several (an expanded `>` chain) contributes each tuple's own fragment.
/// Sentences without tuples are folded into the preceding block, or the
/// first block when they lead the instruction.
pub fn segment(text: &str, beam: &ParseBeam) -> Result<SegmentedInstruction, ParseError> {
    let text_len = text.chars().count();
    let sentences = split_sentences(text);

    // Sentence index owning each tuple.
    let mut owner = Vec::with_capacity(beam.tuples.len());
    for (index, tuple) in beam.tuples.iter().enumerate() {
        let span = tuple.source_span;
        if span.is_empty() || span.end > text_len {
            return Err(ParseError::MisalignedBeam { index, span });
        }
        let s = sentences
            .iter()
            .position(|s| s.span.contains(&span))
            .ok_or(ParseError::MisalignedBeam { index, span })?;
        owner.push(s);
    }

    let mut ranges: Vec<Span> = Vec::with_capacity(beam.tuples.len());
    for (index, tuple) in beam.tuples.iter().enumerate() {
        let s = owner[index];
        let shared = owner.iter().filter(|&&o| o == s).count() > 1;
        ranges.push(if shared {
            tuple.source_span
        } else {
            sentences[s].span
        });
    }

    let mut leading: Option<usize> = None;
    for (s, sentence) in sentences.iter().enumerate() {
        if owner.contains(&s) {
            continue;
        }
        match owner.iter().rposition(|&o| o < s) {
            Some(prev) => ranges[prev].end = ranges[prev].end.max(sentence.span.end),
            None => {
                leading.get_or_insert(sentence.span.start);
            }
        }
    }
    if let (Some(start), Some(first)) = (leading, ranges.first_mut()) {
        first.start = first.start.min(start);
    }

    Ok(SegmentedInstruction {
        steps: ranges
            .into_iter()
            .enumerate()
            .map(|(tuple_index, span)| SegmentedStep {
                text: span.slice(text).to_string(),
                span,
                tuple_index,
            })
            .collect(),
        source: text.to_string(),
    })
}
