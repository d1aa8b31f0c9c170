//! Deterministic gazetteer extractor compiled from a fact schema.

use regex::Regex;

use super::{segment::split_sentences, ExtractError, ExtractedFact, ExtractedModifier, Extractor, ExtractorDescriptor};
use super::PhraseBank;
use crate::cas::Layer;
use crate::fill::quantity_regex;
use crate::schema::{FactSchema, ModifierRole, ValueStandardizer};
use crate::text::{CharIndex, Lexicon, NormalizedView, SpanOffset};

const NEGATION_EN: &[&str] = &["no", "not", "without"];
const NEGATION_DE: &[&str] = &["kein", "keine", "keinen", "nicht", "ohne"];

/// Built-in negation triggers for a BCP-47 tag. Unknown languages get every
/// built-in list.
pub fn negation_triggers(language: &str) -> Vec<&'static str> {
    let primary = language.split('-').next().unwrap_or_default().to_ascii_lowercase();
    match primary.as_str() {
        "en" => NEGATION_EN.to_vec(),
        "de" => NEGATION_DE.to_vec(),
        _ => NEGATION_EN.iter().chain(NEGATION_DE).copied().collect(),
    }
}

#[derive(Debug, Clone)]
struct FactRule {
    fact_id: String,
    anchor_id: String,
    anchors: Lexicon<()>,
    modifiers: Lexicon<String>,
    /// Number-plus-unit pattern and the value-unit modifier it fills.
    quantity: Option<(Regex, String)>,
}

/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct BaselineExtractor {
    descriptor: ExtractorDescriptor,
    rules: Vec<FactRule>,
    empty_lexicon: Vec<String>,
}

/// Compiles one rule per fact: an anchor lexicon (the schema lexicon, the
/// anchor label and anchor phrase-bank entries) and a modifier lexicon
/// (value-set synonyms, phrase-bank entries and, for negation-role
/// modifiers, the built-in triggers). Value-unit modifiers are found by a
/// number-plus-accepted-unit pattern; when a fact has several, the first in
/// the fact's modifier order receives the matches.
pub fn build_baseline_extractor(schema: &FactSchema, phrases: &PhraseBank) -> BaselineExtractor {
    let mut rules = Vec::with_capacity(schema.facts.len());
    let mut empty_lexicon = Vec::new();
    for fact in &schema.facts {
        let mut anchors = Lexicon::new();
        let bank_anchor: Vec<&str> = phrases.phrases_for(Layer::Anchor, &fact.anchor.id).collect();
        if fact.anchor.lexicon.is_empty() && bank_anchor.is_empty() {
            empty_lexicon.push(fact.id.clone());
        }
        for surface in fact.anchor.lexicon.iter().map(String::as_str).chain(bank_anchor).chain([fact.anchor.label.as_str()]) {
            anchors.insert(surface, ());
        }

        let mut modifiers = Lexicon::new();
        let mut quantity = None;
        for mid in &fact.modifier_ids {
            let Some(def) = schema.modifier(mid) else { continue };
            match &def.standardizer {
                ValueStandardizer::ValueSet(vs) => {
                    for syn in vs.values.iter().flat_map(|v| &v.synonyms) {
                        modifiers.insert(syn, mid.clone());
                    }
                }
                ValueStandardizer::ValueUnit(vu) if quantity.is_none() => {
                    quantity = quantity_regex(vu.accepted_units.keys().map(String::as_str)).map(|re| (re, mid.clone()));
                }
                _ => {}
            }
            if def.role == ModifierRole::Negation {
                for t in negation_triggers(&schema.language) {
                    modifiers.insert(t, mid.clone());
                }
            }
            for p in phrases.phrases_for(Layer::Modifier, mid) {
                modifiers.insert(p, mid.clone());
            }
        }
        rules.push(FactRule {
            fact_id: fact.id.clone(),
            anchor_id: fact.anchor.id.clone(),
            anchors,
            modifiers,
            quantity,
        });
    }
    BaselineExtractor {
        descriptor: ExtractorDescriptor::baseline("baseline", schema.schema_ref()),
        rules,
        empty_lexicon,
    }
}

impl BaselineExtractor {
    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.descriptor.name = name.into();
        self
    }

    /// Facts whose anchor has no surface forms beyond its label.
    pub fn empty_lexicon(&self) -> &[String] {
        &self.empty_lexicon
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// One fact per (sentence, fact rule) whose anchor lexicon matches in the
    /// sentence: the fact span is the trimmed sentence, the anchor is the
    /// first match and modifiers are every lexicon or quantity match within
    /// the sentence.
    pub fn extract(&self, text: &str) -> Vec<ExtractedFact> {
        let chars = CharIndex::new(text);
        let mut out = Vec::new();
        for sentence in split_sentences(text) {
            let stext = chars.slice(sentence).expect("sentence inside text");
            let view = NormalizedView::new(stext);
            let shift = |s: SpanOffset| SpanOffset::new(s.begin + sentence.begin, s.end + sentence.begin);
            let local = CharIndex::new(stext);
            for rule in &self.rules {
                let Some(anchor) = rule.anchors.find_leftmost_longest(&view).into_iter().next() else { continue };
                let mut modifiers: Vec<ExtractedModifier> = rule
                    .modifiers
                    .find_leftmost_longest(&view)
                    .into_iter()
                    .map(|m| ExtractedModifier { modifier_id: m.payload, span: shift(m.span), confidence: Some(1.0) })
                    .collect();
                if let Some((re, mid)) = &rule.quantity {
                    for m in re.find_iter(stext) {
                        let (Some(b), Some(e)) = (local.cp_of_byte(m.start()), local.cp_of_byte(m.end())) else { continue };
                        let span = shift(SpanOffset::new(b, e));
                        if modifiers.iter().all(|x| x.span.intersection_len(&span) == 0) {
                            modifiers.push(ExtractedModifier { modifier_id: mid.clone(), span, confidence: Some(1.0) });
                        }
                    }
                }
                modifiers.sort_by(|a, b| (a.span, &a.modifier_id).cmp(&(b.span, &b.modifier_id)));
                out.push(ExtractedFact {
                    fact_id: rule.fact_id.clone(),
                    span: sentence,
                    anchor_id: rule.anchor_id.clone(),
                    anchor_span: shift(anchor.span),
                    modifiers,
                    confidence: Some(1.0),
                    anchor_confidence: Some(1.0),
                });
            }
        }
        out
    }
}

impl Extractor for BaselineExtractor {
    fn descriptor(&self) -> &ExtractorDescriptor {
        &self.descriptor
    }

    fn run(&self, text: &str) -> Result<Vec<ExtractedFact>, ExtractError> {
        Ok(self.extract(text))
    }
}
