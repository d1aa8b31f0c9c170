//! Annotation artifacts: the RadEx CAS document model, its XMI form, the
//! converter for annotation-tool exports, and annotation-tool configuration.
//!
//! Offsets inside this crate are Unicode code points. XMI files carry UIMA
//! offsets (UTF-16 code units); translation happens only at the XMI boundary.

mod config;
mod convert;
mod xmi;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{FactSchema, SchemaRef};
pub use crate::text::SpanOffset;

pub use config::{generate_annotation_config, AnnotationConfiguration, AnnotationLayer, Granularity, LayerTag};
pub use convert::{
    convert_external_cas, EntityIssue, ExternalCasMapping, ExternalTypeMapping, IssueKind, OffsetEncoding,
};
pub use xmi::{parse_radex_cas, serialize_radex_cas};

/// The three annotation layers of the information model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    Fact,
    Anchor,
    Modifier,
}

impl Layer {
    pub const ALL: [Layer; 3] = [Layer::Fact, Layer::Anchor, Layer::Modifier];

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Fact => "fact",
            Layer::Anchor => "anchor",
            Layer::Modifier => "modifier",
        }
    }
}

impl std::fmt::Display for Layer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierAnnotation {
    pub modifier_id: String,
    pub span: SpanOffset,
}

/// One fact: a contiguous span with exactly one anchor and any number of
/// modifiers, all contained in the fact span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactAnnotation {
    pub fact_id: String,
    pub span: SpanOffset,
    pub anchor_id: String,
    pub anchor_span: SpanOffset,
    #[serde(default)]
    pub modifiers: Vec<ModifierAnnotation>,
}

impl FactAnnotation {
    /// Span-level invariant problems for a document of `doc_len` code points.
    pub fn span_problems(&self, doc_len: usize) -> Vec<String> {
        let mut out = Vec::new();
        if !self.span.is_valid_for(doc_len) {
            out.push(format!("fact {} span {} outside document of length {doc_len}", self.fact_id, self.span));
        }
        if !self.anchor_span.is_valid_for(doc_len) || !self.span.contains(&self.anchor_span) {
            out.push(format!("anchor {} span {} not inside fact span {}", self.anchor_id, self.anchor_span, self.span));
        }
        for m in &self.modifiers {
            if !m.span.is_valid_for(doc_len) || !self.span.contains(&m.span) {
                out.push(format!("modifier {} span {} not inside fact span {}", m.modifier_id, m.span, self.span));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RadExCasDocument {
    pub doc_id: String,
    pub text: String,
    pub language: String,
    pub schema_id: String,
    pub schema_version: String,
    #[serde(default)]
    pub annotations: Vec<FactAnnotation>,
}

impl RadExCasDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>, schema: &FactSchema) -> Self {
        RadExCasDocument {
            doc_id: doc_id.into(),
            text: text.into(),
            language: schema.language.clone(),
            schema_id: schema.schema_id.clone(),
            schema_version: schema.version.clone(),
            annotations: Vec::new(),
        }
    }

    pub fn schema_ref(&self) -> SchemaRef {
        SchemaRef { schema_id: self.schema_id.clone(), schema_version: self.schema_version.clone() }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Bounds and containment problems, independent of any schema.
    pub fn span_problems(&self) -> Vec<String> {
        let len = self.char_len();
        self.annotations.iter().flat_map(|a| a.span_problems(len)).collect()
    }

    /// Span problems plus ids that do not resolve in `schema`.
    pub fn problems_against(&self, schema: &FactSchema) -> Vec<String> {
        let mut out = self.span_problems();
        if self.schema_ref() != schema.schema_ref() {
            out.push(format!("document follows {} but schema is {}", self.schema_ref(), schema.schema_ref()));
        }
        for a in &self.annotations {
            match schema.fact(&a.fact_id) {
                None => out.push(format!("unknown fact id {:?}", a.fact_id)),
                Some(fact) => {
                    if fact.anchor.id != a.anchor_id {
                        out.push(format!("fact {} expects anchor {:?}, found {:?}", fact.id, fact.anchor.id, a.anchor_id));
                    }
                    for m in &a.modifiers {
                        if !fact.modifier_ids.contains(&m.modifier_id) {
                            out.push(format!("modifier {:?} not defined for fact {}", m.modifier_id, fact.id));
                        }
                    }
                }
            }
        }
        out
    }

    /// Every labelled span of one layer, as `(label, span)`.
    pub fn layer_spans(&self, layer: Layer) -> Vec<(&str, SpanOffset)> {
        match layer {
            Layer::Fact => self.annotations.iter().map(|a| (a.fact_id.as_str(), a.span)).collect(),
            Layer::Anchor => self.annotations.iter().map(|a| (a.anchor_id.as_str(), a.anchor_span)).collect(),
            Layer::Modifier => self
                .annotations
                .iter()
                .flat_map(|a| a.modifiers.iter().map(|m| (m.modifier_id.as_str(), m.span)))
                .collect(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CasError {
    #[error("malformed XMI: {0}")]
    MalformedXmi(String),
    #[error("unknown type {0:?} in RadEx CAS")]
    UnknownType(String),
    #[error("offset out of bounds: {0}")]
    OffsetOutOfBounds(String),
    #[error("external types not covered by the mapping: {}", .0.join(", "))]
    UnmappedType(Vec<String>),
    #[error("{} orphaned or unattached entities", .0.len())]
    OrphanEntity(Vec<EntityIssue>),
    #[error("{} labels do not resolve against the fact schema", .0.len())]
    InvalidLabels(Vec<EntityIssue>),
    #[error("invalid mapping: {0}")]
    InvalidMapping(String),
    #[error("document violates annotation invariants: {}", .0.join("; "))]
    InvalidDocument(Vec<String>),
    #[error("text contains a character XML cannot represent at code point {0}")]
    UnrepresentableText(usize),
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const TABLE1_TEXT: &str = "No suspicious focal findings distinguishable on the right side";

    /// The Table 1 annotation: whole-sentence fact, anchor "focal findings",
    /// modifiers "No", "suspicious", "on the right side".
    pub fn table1_doc() -> RadExCasDocument {
        let schema = crate::schema::fixtures::table1();
        let mut doc = RadExCasDocument::new("table1", TABLE1_TEXT, &schema);
        doc.annotations.push(FactAnnotation {
            fact_id: "mass_described".into(),
            span: SpanOffset::new(0, 62),
            anchor_id: "mass".into(),
            anchor_span: SpanOffset::new(14, 28),
            modifiers: vec![
                ModifierAnnotation { modifier_id: "negation".into(), span: SpanOffset::new(0, 2) },
                ModifierAnnotation { modifier_id: "dignity".into(), span: SpanOffset::new(3, 13) },
                ModifierAnnotation { modifier_id: "laterality".into(), span: SpanOffset::new(45, 62) },
            ],
        });
        doc
    }
}
