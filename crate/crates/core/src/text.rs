//! Text primitives shared by every stage: code-point spans, UTF-16 offset
//! translation, surface normalization and whole-word lexicon matching.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Half-open `[begin, end)` range measured in Unicode code points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanOffset {
    pub begin: usize,
    pub end: usize,
}

impl SpanOffset {
    pub const fn new(begin: usize, end: usize) -> Self {
        SpanOffset { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.begin)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.begin
    }

    /// Nonempty and inside a document of `doc_len` code points.
    pub fn is_valid_for(&self, doc_len: usize) -> bool {
        self.begin < self.end && self.end <= doc_len
    }

    pub fn contains(&self, other: &SpanOffset) -> bool {
        self.begin <= other.begin && other.end <= self.end
    }

    pub fn intersection_len(&self, other: &SpanOffset) -> usize {
        let lo = self.begin.max(other.begin);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }
}

impl std::fmt::Display for SpanOffset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.begin, self.end)
    }
}

/// Number of Unicode code points in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offsets of every code point boundary, so code-point spans can be
/// sliced repeatedly without rescanning the text.
#[derive(Debug, Clone)]
pub struct CharIndex<'a> {
    text: &'a str,
    bytes: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharIndex { text, bytes }
    }

    pub fn len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice(&self, span: SpanOffset) -> Option<&'a str> {
        if span.begin > span.end || span.end > self.len() {
            return None;
        }
        Some(&self.text[self.bytes[span.begin]..self.bytes[span.end]])
    }

    /// Code-point index of a byte offset that lies on a char boundary.
    pub fn cp_of_byte(&self, byte: usize) -> Option<usize> {
        self.bytes.binary_search(&byte).ok()
    }
}

/// Slice `text` by a code-point span.
pub fn slice_cp(text: &str, span: SpanOffset) -> Option<&str> {
    CharIndex::new(text).slice(span)
}

/// Translation table between code-point offsets and UTF-16 code-unit offsets.
#[derive(Debug, Clone)]
pub struct Utf16Offsets {
    // utf16 offset of every code-point boundary, strictly increasing
    boundaries: Vec<usize>,
}

impl Utf16Offsets {
    pub fn new(text: &str) -> Self {
        let mut boundaries = Vec::with_capacity(text.len() + 1);
        let mut unit = 0;
        boundaries.push(0);
        for c in text.chars() {
            unit += c.len_utf16();
            boundaries.push(unit);
        }
        Utf16Offsets { boundaries }
    }

    pub fn codepoint_len(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn utf16_len(&self) -> usize {
        *self.boundaries.last().expect("nonempty")
    }

    pub fn to_utf16(&self, cp: usize) -> Option<usize> {
        self.boundaries.get(cp).copied()
    }

    /// `None` when `unit` is past the end or splits a surrogate pair.
    pub fn to_codepoint(&self, unit: usize) -> Option<usize> {
        self.boundaries.binary_search(&unit).ok()
    }

    pub fn span_to_utf16(&self, span: SpanOffset) -> Option<(usize, usize)> {
        Some((self.to_utf16(span.begin)?, self.to_utf16(span.end)?))
    }

    pub fn span_from_utf16(&self, begin: usize, end: usize) -> Option<SpanOffset> {
        Some(SpanOffset::new(self.to_codepoint(begin)?, self.to_codepoint(end)?))
    }
}

/// Lowercase, trim and collapse internal whitespace runs to one space.
pub fn normalize_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

pub fn is_normalized(s: &str) -> bool {
    normalize_surface(s) == s
}

/// Collapse whitespace runs and trim, preserving case.
pub fn collapse_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// A normalized rendering of a source text that remembers, for every
/// normalized char, which source code point produced it.
#[derive(Debug, Clone)]
pub struct NormalizedView {
    chars: Vec<char>,
    origin: Vec<usize>,
}

impl NormalizedView {
    pub fn new(text: &str) -> Self {
        let mut chars = Vec::with_capacity(text.len());
        let mut origin = Vec::with_capacity(text.len());
        let mut pending_space: Option<usize> = None;
        for (cp, c) in text.chars().enumerate() {
            if c.is_whitespace() {
                if !chars.is_empty() && pending_space.is_none() {
                    pending_space = Some(cp);
                }
                continue;
            }
            if let Some(sp) = pending_space.take() {
                chars.push(' ');
                origin.push(sp);
            }
            for lc in c.to_lowercase() {
                chars.push(lc);
                origin.push(cp);
            }
        }
        NormalizedView { chars, origin }
    }

    pub fn as_chars(&self) -> &[char] {
        &self.chars
    }

    /// Source span covering normalized chars `[start, end)`.
    pub fn source_span(&self, start: usize, end: usize) -> SpanOffset {
        debug_assert!(start < end && end <= self.chars.len());
        SpanOffset::new(self.origin[start], self.origin[end - 1] + 1)
    }

    fn boundary_ok(&self, start: usize, end: usize, needle: &[char]) -> bool {
        let head_word = needle.first().is_some_and(|&c| is_word_char(c));
        let tail_word = needle.last().is_some_and(|&c| is_word_char(c));
        if head_word && start > 0 && is_word_char(self.chars[start - 1]) {
            return false;
        }
        if tail_word && end < self.chars.len() && is_word_char(self.chars[end]) {
            return false;
        }
        true
    }

    /// Every whole-word occurrence of an already-normalized `needle`, as
    /// normalized-char ranges.
    pub fn find_whole_word(&self, needle: &[char]) -> Vec<(usize, usize)> {
        let n = needle.len();
        if n == 0 || n > self.chars.len() {
            return Vec::new();
        }
        (0..=self.chars.len() - n)
            .filter(|&i| self.chars[i..i + n] == *needle && self.boundary_ok(i, i + n, needle))
            .map(|i| (i, i + n))
            .collect()
    }
}

/// A single lexicon hit, in source code points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexiconMatch<P> {
    pub span: SpanOffset,
    pub payload: P,
}

/// Case-insensitive, whitespace-insensitive whole-word phrase matcher.
#[derive(Debug, Clone)]
pub struct Lexicon<P> {
    entries: Vec<(Vec<char>, P)>,
    by_first: HashMap<char, Vec<usize>>,
}

impl<P> Default for Lexicon<P> {
    fn default() -> Self {
        Lexicon { entries: Vec::new(), by_first: HashMap::new() }
    }
}

impl<P: Clone + PartialEq> Lexicon<P> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `phrase` (normalized on insert). Empty phrases and exact
    /// duplicates are ignored.
    pub fn insert(&mut self, phrase: &str, payload: P) {
        let norm: Vec<char> = normalize_surface(phrase).chars().collect();
        let Some(&first) = norm.first() else { return };
        if self.entries.iter().any(|(p, pl)| *p == norm && *pl == payload) {
            return;
        }
        self.by_first.entry(first).or_default().push(self.entries.len());
        self.entries.push((norm, payload));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All whole-word occurrences of all entries, possibly overlapping,
    /// ordered by (start, longest first, insertion order).
    fn raw_hits(&self, view: &NormalizedView) -> Vec<(usize, usize, usize)> {
        let chars = view.as_chars();
        let mut hits = Vec::new();
        for (i, c) in chars.iter().enumerate() {
            let Some(cands) = self.by_first.get(c) else { continue };
            for &idx in cands {
                let needle = &self.entries[idx].0;
                let end = i + needle.len();
                if end <= chars.len() && chars[i..end] == needle[..] && view.boundary_ok(i, end, needle) {
                    hits.push((i, end, idx));
                }
            }
        }
        hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        hits
    }

    /// Every whole-word occurrence, overlapping allowed.
    pub fn find_all(&self, view: &NormalizedView) -> Vec<LexiconMatch<P>> {
        self.raw_hits(view)
            .into_iter()
            .map(|(s, e, idx)| LexiconMatch { span: view.source_span(s, e), payload: self.entries[idx].1.clone() })
            .collect()
    }

    /// Leftmost-longest scan: at each position the longest matching phrase
    /// wins and the scan resumes after it. Entries sharing that exact phrase
    /// all report the same span.
    pub fn find_leftmost_longest(&self, view: &NormalizedView) -> Vec<LexiconMatch<P>> {
        let hits = self.raw_hits(view);
        let mut out = Vec::new();
        let mut cursor = 0;
        let mut i = 0;
        while i < hits.len() {
            let (start, end, _) = hits[i];
            if start < cursor {
                i += 1;
                continue;
            }
            let mut j = i;
            while j < hits.len() && hits[j].0 == start && hits[j].1 == end {
                let payload = self.entries[hits[j].2].1.clone();
                if !out.iter().any(|m: &LexiconMatch<P>| m.span == view.source_span(start, end) && m.payload == payload) {
                    out.push(LexiconMatch { span: view.source_span(start, end), payload });
                }
                j += 1;
            }
            cursor = end;
            i = j;
        }
        out
    }
}
