//! Span text to coded value mapping.

use serde::{Deserialize, Serialize};

use crate::schema::{CodedValue, ValueSet};
use crate::text::{normalize_surface, NormalizedView};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum MappingOutcome {
    Mapped { codes: Vec<CodedValue> },
    Unmapped { raw: String },
    /// One stretch of text matched synonyms of several codes equally well.
    Ambiguous { candidates: Vec<CodedValue> },
    CardinalityViolation { matched: usize, min: u32, max: Option<u32> },
}

impl MappingOutcome {
    pub fn kind(&self) -> &'static str {
        match self {
            MappingOutcome::Mapped { .. } => "mapped",
            MappingOutcome::Unmapped { .. } => "unmapped",
            MappingOutcome::Ambiguous { .. } => "ambiguous",
            MappingOutcome::CardinalityViolation { .. } => "cardinality_violation",
        }
    }
}

/// Maps `text` to the codes whose synonyms occur in it as whole words.
///
/// A hit strictly inside a longer hit of another code is discarded, so
/// "probably benign" beats "benign". Several codes hit on the very same
/// stretch of text is [`MappingOutcome::Ambiguous`]. Repeated hits of one
/// code count once.
pub fn map_to_value_set(text: &str, vs: &ValueSet) -> MappingOutcome {
    let view = NormalizedView::new(text);
    let mut hits: Vec<(usize, usize, usize)> = Vec::new();
    for (ci, value) in vs.values.iter().enumerate() {
        for syn in &value.synonyms {
            let needle: Vec<char> = normalize_surface(syn).chars().collect();
            for (s, e) in view.find_whole_word(&needle) {
                hits.push((s, e, ci));
            }
        }
    }
    let kept: Vec<(usize, usize, usize)> = hits
        .iter()
        .copied()
        .filter(|&(s, e, c)| {
            !hits.iter().any(|&(s2, e2, c2)| c2 != c && s2 <= s && e <= e2 && (e2 - s2) > (e - s))
        })
        .collect();

    let mut candidates: Vec<usize> = Vec::new();
    for &(s, e, c) in &kept {
        if kept.iter().any(|&(s2, e2, c2)| (s2, e2) == (s, e) && c2 != c) && !candidates.contains(&c) {
            candidates.push(c);
        }
    }
    if !candidates.is_empty() {
        candidates.sort_unstable();
        return MappingOutcome::Ambiguous { candidates: candidates.into_iter().map(|c| vs.values[c].clone()).collect() };
    }

    let mut codes: Vec<usize> = kept.iter().map(|h| h.2).collect();
    codes.sort_unstable();
    codes.dedup();
    if codes.is_empty() {
        return MappingOutcome::Unmapped { raw: text.to_string() };
    }
    if !vs.allows(codes.len()) {
        return MappingOutcome::CardinalityViolation { matched: codes.len(), min: vs.min_card, max: vs.max_card };
    }
    MappingOutcome::Mapped { codes: codes.into_iter().map(|c| vs.values[c].clone()).collect() }
}
