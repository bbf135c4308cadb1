use serde::{Deserialize, Serialize};
use std::num::NonZeroUsize;
use thiserror::Error;

use super::profile::ModelProfile;

/// Fraction of the context window treated as usable; the rest absorbs
/// estimator error.
pub const CONTEXT_SAFETY_FACTOR: f64 = 0.8;

const BYTES_PER_TOKEN: usize = 4;

/// Tokenizer-free estimate: `ceil(bytes / 4)`.
///
/// Overcounts for most natural-language text with BPE vocabularies, which is
/// the safe direction for window fitting. Monotone in input length.
pub fn estimate_tokens(text: &str) -> usize {
    text.len().div_ceil(BYTES_PER_TOKEN)
}

/// A positive token allowance for one model request body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenBudget(NonZeroUsize);

impl TokenBudget {
    pub fn new(tokens: usize) -> Option<Self> {
        NonZeroUsize::new(tokens).map(Self)
    }

    pub fn tokens(self) -> usize {
        self.0.get()
    }

    /// Largest byte length whose estimate still fits.
    pub fn max_bytes(self) -> usize {
        self.0.get() * BYTES_PER_TOKEN
    }

    pub fn fits(self, text: &str) -> bool {
        estimate_tokens(text) <= self.0.get()
    }
}

/// One unit of model input text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub index: usize,
    /// Human-readable span, e.g. `packets 1-57`.
    pub label: String,
    pub text: String,
    pub estimated_tokens: usize,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("prompt template needs {template_tokens} tokens but the usable window of {profile} is {usable_tokens}")]
pub struct BudgetTooSmall {
    pub profile: String,
    pub template_tokens: usize,
    pub usable_tokens: usize,
}

/// Tokens left for evidence once the window safety factor and the prompt
/// template are accounted for.
pub fn usable_budget(profile: &ModelProfile, template: &str) -> Result<TokenBudget, BudgetTooSmall> {
    let usable = (profile.max_context_tokens as f64 * CONTEXT_SAFETY_FACTOR).floor() as usize;
    let template_tokens = estimate_tokens(template);
    usable
        .checked_sub(template_tokens)
        .and_then(TokenBudget::new)
        .ok_or_else(|| BudgetTooSmall { profile: profile.name.clone(), template_tokens, usable_tokens: usable })
}

/// Split `s` into consecutive pieces of at most `max_bytes`, never inside a
/// UTF-8 sequence. `max_bytes` must be at least 4.
pub fn hard_split(s: &str, max_bytes: usize) -> Vec<&str> {
    debug_assert!(max_bytes >= BYTES_PER_TOKEN);
    let mut out = Vec::new();
    let mut rest = s;
    while rest.len() > max_bytes {
        let mut cut = max_bytes;
        while !rest.is_char_boundary(cut) {
            cut -= 1;
        }
        out.push(&rest[..cut]);
        rest = &rest[cut..];
    }
    if !rest.is_empty() {
        out.push(rest);
    }
    out
}

/// A piece of text tagged with the unit number it belongs to (packet index,
/// email index, line number).
#[derive(Debug, Clone)]
pub struct Piece {
    pub unit: usize,
    pub text: String,
}

/// Greedy packing: pieces are appended to the current chunk until the next
/// one would exceed the budget. Pieces larger than the budget are
/// hard-split first, so every chunk fits.
pub fn pack_pieces(pieces: impl IntoIterator<Item = Piece>, budget: TokenBudget, unit_noun: &str) -> Vec<TextChunk> {
    let max = budget.max_bytes();
    let mut chunks = Vec::new();
    let mut text = String::new();
    let mut span: Option<(usize, usize)> = None;

    let flush = |text: &mut String, span: &mut Option<(usize, usize)>, chunks: &mut Vec<TextChunk>| {
        if let Some((first, last)) = span.take() {
            let label = if first == last {
                format!("{unit_noun} {first}")
            } else {
                format!("{unit_noun} {first}-{last}")
            };
            let body = std::mem::take(text);
            chunks.push(TextChunk { index: chunks.len(), label, estimated_tokens: estimate_tokens(&body), text: body });
        }
    };

    for piece in pieces {
        for part in hard_split(&piece.text, max) {
            if text.len() + part.len() > max {
                flush(&mut text, &mut span, &mut chunks);
            }
            text.push_str(part);
            span = Some(match span {
                Some((first, _)) => (first, piece.unit),
                None => (piece.unit, piece.unit),
            });
        }
    }
    flush(&mut text, &mut span, &mut chunks);
    chunks
}

/// Split at line boundaries, hard-splitting lines that alone exceed the
/// budget. Concatenating the chunk texts reproduces `text` exactly.
pub fn split_to_budget(text: &str, budget: TokenBudget) -> Vec<TextChunk> {
    let pieces = text
        .split_inclusive('\n')
        .enumerate()
        .map(|(i, line)| Piece { unit: i + 1, text: line.to_string() });
    pack_pieces(pieces, budget, "lines")
}

/// Chunk `text` for `profile`, leaving room for `template`.
pub fn chunk_text(text: &str, profile: &ModelProfile, template: &str) -> Result<Vec<TextChunk>, BudgetTooSmall> {
    let budget = usable_budget(profile, template)?;
    Ok(split_to_budget(text, budget))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn estimate_examples() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("12345678"), 2);
        assert_eq!(estimate_tokens("123456789"), 3);
    }

    #[test]
    fn under_budget_is_single_chunk() {
        let p = ModelProfile::text_default("p", "http://x");
        let chunks = chunk_text("short text\nsecond line", &p, "template").unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].text, "short text\nsecond line");
        assert_eq!(chunks[0].label, "lines 1-2");
    }

    #[test]
    fn empty_is_no_chunks() {
        let p = ModelProfile::text_default("p", "http://x");
        assert!(chunk_text("", &p, "t").unwrap().is_empty());
    }

    #[test]
    fn template_larger_than_window() {
        let mut p = ModelProfile::text_default("tiny", "http://x");
        p.max_context_tokens = 10;
        let err = chunk_text("x", &p, &"t".repeat(100)).unwrap_err();
        assert_eq!(err.usable_tokens, 8);
        assert_eq!(err.template_tokens, 25);
    }

    #[test]
    fn one_megabyte_at_128k() {
        let p = ModelProfile::text_default("p", "http://x");
        let line = "The quick brown fox jumps over the lazy dog. 0123456789\n";
        let text: String = line.repeat(1_000_000 / line.len() + 1);
        let budget = usable_budget(&p, "tmpl").unwrap();
        assert_eq!(budget.tokens(), 102_400 - 1);
        let chunks = chunk_text(&text, &p, "tmpl").unwrap();
        assert!(chunks.len() >= 3);
        assert!(chunks.iter().all(|c| c.estimated_tokens <= budget.tokens()));
        let joined: String = chunks.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(joined, text);
    }

    #[test]
    fn hard_split_respects_char_boundaries() {
        let s = "ééééé"; // 10 bytes
        let parts = hard_split(s, 5);
        assert_eq!(parts, ["éé", "éé", "é"]);
    }

    proptest! {
        #[test]
        fn subadditive(a in ".{0,64}", b in ".{0,64}") {
            let ab = format!("{a}{b}");
            prop_assert!(estimate_tokens(&ab) <= estimate_tokens(&a) + estimate_tokens(&b) + 1);
            prop_assert!(estimate_tokens(&ab) >= estimate_tokens(&a));
        }

        #[test]
        fn split_is_lossless_and_fits(text in "(.{0,40}\n?){0,40}", budget in 1usize..40) {
            let b = TokenBudget::new(budget).unwrap();
            let chunks = split_to_budget(&text, b);
            prop_assert!(chunks.iter().all(|c| c.estimated_tokens <= budget && !c.text.is_empty()));
            let joined: String = chunks.iter().map(|c| c.text.as_str()).collect();
            prop_assert_eq!(joined, text);
            prop_assert!(chunks.iter().enumerate().all(|(i, c)| c.index == i));
        }
    }
}
