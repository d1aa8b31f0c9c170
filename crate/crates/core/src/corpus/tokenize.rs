use serde::{Deserialize, Serialize};

use crate::text::SpanOffset;

/// A surface string and its code-point span in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub span: SpanOffset,
}

fn is_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Whitespace split, then leading and trailing punctuation chars peeled off
/// one token per char. Inner punctuation (`1,5`, `z.B`) stays attached.
///
/// The same tokenizer backs corpus statistics and the token-F1 metric.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars, start, i, &mut tokens);
    }
    tokens
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<Token>) {
    let mut lo = start;
    let mut hi = end;
    while lo < hi && is_punct(chars[lo]) {
        lo += 1;
    }
    while hi > lo && is_punct(chars[hi - 1]) {
        hi -= 1;
    }
    let mut push = |b: usize, e: usize| {
        out.push(Token { surface: chars[b..e].iter().collect(), span: SpanOffset::new(b, e) });
    };
    for p in start..lo {
        push(p, p + 1);
    }
    if lo < hi {
        push(lo, hi);
    }
    for p in hi..end {
        push(p, p + 1);
    }
}
