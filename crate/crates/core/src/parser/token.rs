use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A set of normalized tokens. Ordered so it serializes deterministically.
pub type TokenSet = BTreeSet<String>;

/// Half-open range of character (Unicode scalar) offsets into a source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Slices `text` by character offsets. Out-of-range ends are clamped.
    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        let byte_at = |char_idx: usize| {
            text.char_indices()
                .nth(char_idx)
                .map(|(b, _)| b)
                .unwrap_or(text.len())
        };
        let start = byte_at(self.start);
        let end = byte_at(self.end).max(start);
        &text[start..end]
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(span: Span) -> Self {
        [span.start, span.end]
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub span: Span,
}

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || matches!(
            c,
            '.' | ',' | ';' | ':' | '!' | '?' | '>' | '’' | '‘' | '\'' | '"' | '“' | '”' | '(' | ')'
        )
}

/// Splits text into lowercase word tokens. Punctuation separates words;
/// `&` is kept as a token of its own because UI labels use it.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let mut start = 0;

    let flush = |current: &mut String, start: usize, end: usize, tokens: &mut Vec<Token>| {
        if !current.is_empty() {
            tokens.push(Token {
                text: std::mem::take(current),
                span: Span::new(start, end),
            });
        }
    };

    let mut count = 0;
    for (i, c) in text.chars().enumerate() {
        count = i + 1;
        if c == '&' {
            flush(&mut current, start, i, &mut tokens);
            tokens.push(Token {
                text: "&".to_string(),
                span: Span::new(i, i + 1),
            });
        } else if is_separator(c) {
            flush(&mut current, start, i, &mut tokens);
        } else {
            if current.is_empty() {
                start = i;
            }
            current.extend(c.to_lowercase());
        }
    }
    flush(&mut current, start, count, &mut tokens);
    tokens
}

/// Token set of a piece of UI or instruction text.
pub fn token_set(text: &str) -> TokenSet {
    tokenize(text).into_iter().map(|t| t.text).collect()
}

/// Tokens joined by single spaces.
pub fn phrase_string(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(text: &str) -> Vec<String> {
        tokenize(text).into_iter().map(|t| t.text).collect()
    }

    #[test]
    fn ampersand_is_kept() {
        assert_eq!(words("Tap Apps & notifications."), ["tap", "apps", "&", "notifications"]);
        assert_eq!(words("A&B"), ["a", "&", "b"]);
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("  .,; ").is_empty());
    }

    #[test]
    fn punctuation_separates() {
        assert_eq!(words("Turn data saver on."), ["turn", "data", "saver", "on"]);
        assert_eq!(words("device’s settings"), ["device", "s", "settings"]);
        assert_eq!(words("Don't show (all)"), ["don", "t", "show", "all"]);
        assert_eq!(words("data usage > data saver"), ["data", "usage", "data", "saver"]);
    }

    #[test]
    fn spans_are_char_offsets() {
        let text = "Open device’s Wi-Fi";
        let toks = tokenize(text);
        assert_eq!(toks[2].text, "s");
        assert_eq!(toks[2].span, Span::new(12, 13));
        assert_eq!(toks[3].span.slice(text), "Wi-Fi");
        assert_eq!(toks[3].text, "wi-fi");
    }

    #[test]
    fn snapshot_style_tokens() {
        let set = token_set("On lock screen");
        assert_eq!(set, ["on", "lock", "screen"].iter().map(|s| s.to_string()).collect());
    }
}
