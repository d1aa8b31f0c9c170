//! The extraction contract shared by all extractors, the rule-based
//! baseline, phrase-based pre-annotation, the remote inference client and
//! evaluation metrics.

mod baseline;
mod metrics;
mod phrases;
mod remote;
mod segment;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cas::{FactAnnotation, ModifierAnnotation};
use crate::exec::{self, Strategy};
use crate::schema::{FactSchema, SchemaRef};
use crate::text::SpanOffset;

pub use baseline::{build_baseline_extractor, negation_triggers, BaselineExtractor};
pub use metrics::{
    evaluate_entity_f1, evaluate_entity_f1_corpus, evaluate_token_f1, evaluate_token_f1_corpus, Entity,
    EvaluationResult, QaItem, SequenceItem,
};
pub use phrases::{apply_phrase_annotations, PhraseAnnotation, PhraseBank, PhraseEntry};
pub use remote::{remote_extract, RemoteExtractor, WireRequest, DEFAULT_TIMEOUT};
pub use segment::split_sentences;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedModifier {
    pub modifier_id: String,
    pub span: SpanOffset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

/// A fact as returned by an extractor: the annotation shape plus optional
/// per-span confidences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedFact {
    pub fact_id: String,
    pub span: SpanOffset,
    pub anchor_id: String,
    pub anchor_span: SpanOffset,
    #[serde(default)]
    pub modifiers: Vec<ExtractedModifier>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_confidence: Option<f64>,
}

impl ExtractedFact {
    pub fn to_annotation(&self) -> FactAnnotation {
        FactAnnotation {
            fact_id: self.fact_id.clone(),
            span: self.span,
            anchor_id: self.anchor_id.clone(),
            anchor_span: self.anchor_span,
            modifiers: self
                .modifiers
                .iter()
                .map(|m| ModifierAnnotation { modifier_id: m.modifier_id.clone(), span: m.span })
                .collect(),
        }
    }

    pub fn from_annotation(a: &FactAnnotation) -> Self {
        ExtractedFact {
            fact_id: a.fact_id.clone(),
            span: a.span,
            anchor_id: a.anchor_id.clone(),
            anchor_span: a.anchor_span,
            modifiers: a
                .modifiers
                .iter()
                .map(|m| ExtractedModifier { modifier_id: m.modifier_id.clone(), span: m.span, confidence: None })
                .collect(),
            confidence: None,
            anchor_confidence: None,
        }
    }

    /// Bounds, containment, id resolution and confidence-range problems.
    pub fn problems(&self, schema: &FactSchema, doc_len: usize) -> Vec<String> {
        let mut out = self.to_annotation().span_problems(doc_len);
        match schema.fact(&self.fact_id) {
            None => out.push(format!("unknown fact id {:?}", self.fact_id)),
            Some(def) => {
                if def.anchor.id != self.anchor_id {
                    out.push(format!("fact {} expects anchor {:?}, got {:?}", def.id, def.anchor.id, self.anchor_id));
                }
                for m in &self.modifiers {
                    if !def.modifier_ids.contains(&m.modifier_id) {
                        out.push(format!("modifier {:?} not defined for fact {}", m.modifier_id, def.id));
                    }
                }
            }
        }
        let confidences = [self.confidence, self.anchor_confidence]
            .into_iter()
            .chain(self.modifiers.iter().map(|m| m.confidence))
            .flatten();
        for c in confidences {
            if !(0.0..=1.0).contains(&c) {
                out.push(format!("confidence {c} outside [0,1] in fact {}", self.fact_id));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractorKind {
    Baseline,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorDescriptor {
    pub name: String,
    pub kind: ExtractorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    pub schema: SchemaRef,
}

impl ExtractorDescriptor {
    pub fn baseline(name: impl Into<String>, schema: SchemaRef) -> Self {
        ExtractorDescriptor { name: name.into(), kind: ExtractorKind::Baseline, endpoint: None, schema }
    }

    pub fn remote(name: impl Into<String>, endpoint: impl Into<String>, schema: SchemaRef) -> Self {
        ExtractorDescriptor { name: name.into(), kind: ExtractorKind::Remote, endpoint: Some(endpoint.into()), schema }
    }

    pub fn validate(&self) -> Result<(), ExtractError> {
        match (self.kind, &self.endpoint) {
            (ExtractorKind::Remote, None) => {
                Err(ExtractError::InvalidDescriptor(format!("remote extractor {} has no endpoint", self.name)))
            }
            (ExtractorKind::Remote, Some(url)) if !(url.starts_with("http://") || url.starts_with("https://")) => {
                Err(ExtractError::InvalidDescriptor(format!("endpoint {url:?} is not an http(s) URL")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("invalid phrase bank: {0}")]
    InvalidPhraseBank(String),
    #[error("invalid extractor descriptor: {0}")]
    InvalidDescriptor(String),
    #[error("extractor endpoint {endpoint} unreachable: {message}")]
    Unreachable { endpoint: String, message: String },
    #[error("extractor endpoint {endpoint} violated the protocol: {message}")]
    ProtocolError { endpoint: String, message: String },
    #[error("extractor endpoint {endpoint} answered {status} {code}: {message}")]
    Upstream { endpoint: String, status: u16, code: String, message: String },
    #[error("extractor endpoint {endpoint} returned invalid spans: {}", issues.join("; "))]
    InvalidSpans { endpoint: String, issues: Vec<String> },
}

/// Anything that turns report text into extracted facts.
pub trait Extractor: Send + Sync {
    fn descriptor(&self) -> &ExtractorDescriptor;
    fn run(&self, text: &str) -> Result<Vec<ExtractedFact>, ExtractError>;
}

/// Runs `extractor` on every text, preserving input order.
pub fn extract_batch<E: Extractor + ?Sized>(
    extractor: &E,
    texts: &[String],
    strategy: Strategy,
) -> Vec<Result<Vec<ExtractedFact>, ExtractError>> {
    exec::map(strategy, texts, |t| extractor.run(t))
}
