//! Phrase banks and phrase-based pre-annotation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ExtractError;
use crate::cas::Layer;
use crate::text::{normalize_surface, Lexicon, NormalizedView, SpanOffset};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseEntry {
    pub phrase: String,
    pub layer: Layer,
    pub id: String,
}

#[derive(Serialize, Deserialize)]
struct PhraseBankFile {
    entries: Vec<PhraseEntry>,
}

/// Recurring phrases annotated once and applied corpus-wide.
#[derive(Debug, Clone)]
pub struct PhraseBank {
    entries: Vec<PhraseEntry>,
    lexicons: [Lexicon<String>; 3],
}

impl PartialEq for PhraseBank {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Default for PhraseBank {
    fn default() -> Self {
        PhraseBank { entries: Vec::new(), lexicons: Default::default() }
    }
}

fn layer_index(layer: Layer) -> usize {
    match layer {
        Layer::Fact => 0,
        Layer::Anchor => 1,
        Layer::Modifier => 2,
    }
}

impl PhraseBank {
    /// Rejects empty phrases and duplicate (normalized phrase, layer, id)
    /// triples.
    pub fn new(entries: Vec<PhraseEntry>) -> Result<Self, ExtractError> {
        let mut seen = BTreeSet::new();
        let mut lexicons: [Lexicon<String>; 3] = Default::default();
        for e in &entries {
            let norm = normalize_surface(&e.phrase);
            if norm.is_empty() {
                return Err(ExtractError::InvalidPhraseBank(format!("empty phrase for {} {}", e.layer, e.id)));
            }
            if !seen.insert((norm.clone(), e.layer, e.id.clone())) {
                return Err(ExtractError::InvalidPhraseBank(format!(
                    "duplicate entry ({norm:?}, {}, {})",
                    e.layer, e.id
                )));
            }
            lexicons[layer_index(e.layer)].insert(&norm, e.id.clone());
        }
        Ok(PhraseBank { entries, lexicons })
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ExtractError> {
        let file: PhraseBankFile =
            serde_json::from_slice(bytes).map_err(|e| ExtractError::InvalidPhraseBank(e.to_string()))?;
        Self::new(file.entries)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&PhraseBankFile { entries: self.entries.clone() })
            .expect("phrase bank serializes");
        s.push('\n');
        s
    }

    pub fn entries(&self) -> &[PhraseEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries of one layer and id.
    pub fn phrases_for<'a>(&'a self, layer: Layer, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.entries.iter().filter(move |e| e.layer == layer && e.id == id).map(|e| e.phrase.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseAnnotation {
    pub layer: Layer,
    pub id: String,
    pub span: SpanOffset,
}

/// Every case-insensitive, whitespace-normalized occurrence of the bank's
/// phrases, longest match first at each position and non-overlapping within
/// a layer. Sorted by span, then layer and id.
pub fn apply_phrase_annotations(text: &str, bank: &PhraseBank) -> Vec<PhraseAnnotation> {
    if bank.is_empty() {
        return Vec::new();
    }
    let view = NormalizedView::new(text);
    let mut out: Vec<PhraseAnnotation> = Layer::ALL
        .iter()
        .flat_map(|&layer| {
            bank.lexicons[layer_index(layer)]
                .find_leftmost_longest(&view)
                .into_iter()
                .map(move |m| PhraseAnnotation { layer, id: m.payload, span: m.span })
        })
        .collect();
    out.sort_by(|a, b| (a.span, a.layer, &a.id).cmp(&(b.span, b.layer, &b.id)));
    out
}
