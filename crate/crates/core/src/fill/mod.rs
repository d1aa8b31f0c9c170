//! Template filling: extracted spans mapped onto value standardizers.

mod quantity;
mod value_set;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::exec::{self, Strategy};
use crate::extract::ExtractedFact;
use crate::schema::{FactSchema, ModifierRole, ReportTemplate, SchemaRef, TemplateEntry, ValueStandardizer};
use crate::text::{CharIndex, SpanOffset};

pub(crate) use quantity::quantity_regex;
pub use quantity::{standardize_quantity, Quantity, QuantityOutcome};
pub use value_set::{map_to_value_set, MappingOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactStatus {
    Present,
    Negated,
    Absent,
}

impl FactStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FactStatus::Present => "present",
            FactStatus::Negated => "negated",
            FactStatus::Absent => "absent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerValue {
    FreeText(String),
    ValueSet(MappingOutcome),
    ValueUnit(QuantityOutcome),
}

/// All spans of one modifier within one fact instance. `raw_text` joins the
/// span texts in document order with `"; "` and is what the standardizer saw.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierAnswer {
    pub modifier_id: String,
    pub raw_text: String,
    pub spans: Vec<SpanOffset>,
    pub value: AnswerValue,
}

/// One extracted instance of a fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilledInstance {
    pub status: FactStatus,
    pub span: SpanOffset,
    pub anchor_text: String,
    pub anchor_span: SpanOffset,
    pub modifier_answers: Vec<ModifierAnswer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilledItem {
    pub fact_id: String,
    pub status: FactStatus,
    /// Empty when absent.
    pub anchor_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<SpanOffset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_span: Option<SpanOffset>,
    pub modifier_answers: Vec<ModifierAnswer>,
    /// Later instances of the same fact, in document order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub repeats: Vec<FilledInstance>,
}

impl FilledItem {
    fn absent(fact_id: &str) -> Self {
        FilledItem {
            fact_id: fact_id.to_string(),
            status: FactStatus::Absent,
            anchor_text: String::new(),
            span: None,
            anchor_span: None,
            modifier_answers: Vec::new(),
            repeats: Vec::new(),
        }
    }

    pub fn answer(&self, modifier_id: &str) -> Option<&ModifierAnswer> {
        self.modifier_answers.iter().find(|a| a.modifier_id == modifier_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateRef {
    pub template_id: String,
    pub schema_id: String,
    pub schema_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilledTemplate {
    pub template: TemplateRef,
    /// Lowercase hex SHA-256 of the UTF-8 report text.
    pub report_sha256: String,
    pub extractor: String,
    pub items: Vec<FilledItem>,
}

impl FilledTemplate {
    pub fn item(&self, fact_id: &str) -> Option<&FilledItem> {
        self.items.iter().find(|i| i.fact_id == fact_id)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("filled template serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FillError {
    #[error("template targets {template} but schema is {schema}")]
    SchemaMismatch { template: SchemaRef, schema: SchemaRef },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
    #[error("extracted spans are invalid for the report: {}", .0.join("; "))]
    InvalidSpans(Vec<String>),
}

pub fn report_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Runs one span text through a modifier's standardizer.
pub fn standardize(standardizer: &ValueStandardizer, text: &str) -> AnswerValue {
    match standardizer {
        ValueStandardizer::FreeText => AnswerValue::FreeText(text.to_string()),
        ValueStandardizer::ValueSet(vs) => AnswerValue::ValueSet(map_to_value_set(text, vs)),
        ValueStandardizer::ValueUnit(vu) => AnswerValue::ValueUnit(standardize_quantity(text, vu)),
    }
}

fn fill_instance(
    schema: &FactSchema,
    entry: &TemplateEntry,
    fact: &ExtractedFact,
    chars: &CharIndex<'_>,
) -> FilledInstance {
    let slice = |s: SpanOffset| chars.slice(s).expect("spans checked").to_string();
    let negated = fact
        .modifiers
        .iter()
        .any(|m| schema.modifier(&m.modifier_id).is_some_and(|d| d.role == ModifierRole::Negation));
    let mut answers = Vec::new();
    for mid in &entry.modifier_ids {
        let mut spans: Vec<SpanOffset> =
            fact.modifiers.iter().filter(|m| &m.modifier_id == mid).map(|m| m.span).collect();
        if spans.is_empty() {
            continue;
        }
        spans.sort();
        spans.dedup();
        let raw_text = spans.iter().map(|s| slice(*s)).collect::<Vec<_>>().join("; ");
        let def = schema.modifier(mid).expect("template checked against schema");
        answers.push(ModifierAnswer {
            modifier_id: mid.clone(),
            value: standardize(&def.standardizer, &raw_text),
            raw_text,
            spans,
        });
    }
    FilledInstance {
        status: if negated { FactStatus::Negated } else { FactStatus::Present },
        span: fact.span,
        anchor_text: slice(fact.anchor_span),
        anchor_span: fact.anchor_span,
        modifier_answers: answers,
    }
}

/// Fills `template` from extracted facts of `text`.
///
/// Items follow template order. A fact with no extraction is absent; one
/// whose extraction carries a negation-role modifier is negated; otherwise
/// present. The first extraction in document order fills the item and later
/// ones are kept as repeats. Extractions of facts outside the template are
/// ignored.
pub fn fill_template(
    template: &ReportTemplate,
    schema: &FactSchema,
    extracted: &[ExtractedFact],
    text: &str,
    extractor: &str,
) -> Result<FilledTemplate, FillError> {
    if template.schema_ref() != schema.schema_ref() {
        return Err(FillError::SchemaMismatch { template: template.schema_ref(), schema: schema.schema_ref() });
    }
    template.check_against(schema).map_err(|e| FillError::InvalidTemplate(e.to_string()))?;
    let chars = CharIndex::new(text);
    let problems: Vec<String> = extracted.iter().flat_map(|f| f.problems(schema, chars.len())).collect();
    if !problems.is_empty() {
        return Err(FillError::InvalidSpans(problems));
    }
    let items = template
        .entries
        .iter()
        .map(|entry| {
            let mut instances: Vec<&ExtractedFact> = extracted.iter().filter(|f| f.fact_id == entry.fact_id).collect();
            instances.sort_by_key(|f| (f.span, f.anchor_span));
            let mut filled = instances.into_iter().map(|f| fill_instance(schema, entry, f, &chars));
            match filled.next() {
                None => FilledItem::absent(&entry.fact_id),
                Some(first) => FilledItem {
                    fact_id: entry.fact_id.clone(),
                    status: first.status,
                    anchor_text: first.anchor_text,
                    span: Some(first.span),
                    anchor_span: Some(first.anchor_span),
                    modifier_answers: first.modifier_answers,
                    repeats: filled.collect(),
                },
            }
        })
        .collect();
    Ok(FilledTemplate {
        template: TemplateRef {
            template_id: template.template_id.clone(),
            schema_id: template.schema_id.clone(),
            schema_version: template.schema_version.clone(),
        },
        report_sha256: report_hash(text),
        extractor: extractor.to_string(),
        items,
    })
}

/// One report for [`fill_batch`].
#[derive(Debug, Clone)]
pub struct FillJob {
    pub text: String,
    pub extracted: Vec<ExtractedFact>,
}

pub fn fill_batch(
    template: &ReportTemplate,
    schema: &FactSchema,
    jobs: &[FillJob],
    extractor: &str,
    strategy: Strategy,
) -> Vec<Result<FilledTemplate, FillError>> {
    exec::map(strategy, jobs, |j| fill_template(template, schema, &j.extracted, &j.text, extractor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cas::fixtures::{table1_doc, TABLE1_TEXT};
    use crate::schema::derive_report_template;
    use crate::schema::fixtures::{mammography, table1};
    use proptest::prelude::*;

    fn table1_template() -> ReportTemplate {
        derive_report_template(&table1(), "t1", &["mass_described".to_string()], None).unwrap()
    }

    fn table1_extraction() -> Vec<ExtractedFact> {
        vec![ExtractedFact::from_annotation(&table1_doc().annotations[0])]
    }

    #[test]
    fn table1_fill() {
        let filled = fill_template(&table1_template(), &table1(), &table1_extraction(), TABLE1_TEXT, "test").unwrap();
        let item = &filled.items[0];
        assert_eq!(item.status, FactStatus::Negated);
        assert_eq!(item.anchor_text, "focal findings");
        match &item.answer("laterality").unwrap().value {
            AnswerValue::ValueSet(MappingOutcome::Mapped { codes }) => {
                assert_eq!((codes[0].code.as_str(), codes[0].display.as_str()), ("24028007", "Right"))
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(item.answer("dignity").unwrap().value, AnswerValue::FreeText("suspicious".into()));
        assert_eq!(filled.report_sha256, report_hash(TABLE1_TEXT));
        assert_eq!(filled.report_sha256.len(), 64);
    }

    #[test]
    fn empty_extraction_is_all_absent() {
        let schema = mammography();
        let ids: Vec<String> = schema.facts.iter().map(|f| f.id.clone()).collect();
        let t = derive_report_template(&schema, "all", &ids, None).unwrap();
        let filled = fill_template(&t, &schema, &[], "Unauffällig.", "x").unwrap();
        assert_eq!(filled.items.len(), 24);
        assert!(filled.items.iter().all(|i| i.status == FactStatus::Absent && i.modifier_answers.is_empty()));
    }

    #[test]
    fn negation_modifier_drives_status() {
        let mut e = table1_extraction();
        e[0].modifiers.remove(0);
        let filled = fill_template(&table1_template(), &table1(), &e, TABLE1_TEXT, "x").unwrap();
        assert_eq!(filled.items[0].status, FactStatus::Present);
    }

    #[test]
    fn foreign_facts_ignored_and_repeats_kept() {
        let schema = mammography();
        let t = derive_report_template(&schema, "one", &[schema.facts[1].id.clone()], None).unwrap();
        let text = "x".repeat(40);
        let mk = |f: usize, b: usize| ExtractedFact {
            fact_id: schema.facts[f].id.clone(),
            span: SpanOffset::new(b, b + 5),
            anchor_id: schema.facts[f].anchor.id.clone(),
            anchor_span: SpanOffset::new(b, b + 1),
            modifiers: vec![],
            confidence: None,
            anchor_confidence: None,
        };
        let filled = fill_template(&t, &schema, &[mk(0, 0), mk(1, 20), mk(1, 10)], &text, "x").unwrap();
        assert_eq!(filled.items.len(), 1);
        assert_eq!(filled.items[0].span, Some(SpanOffset::new(10, 15)));
        assert_eq!(filled.items[0].repeats.len(), 1);
    }

    #[test]
    fn multiple_spans_of_one_modifier_merge() {
        let mut e = table1_extraction();
        let text = format!("{TABLE1_TEXT} and left");
        e[0].span = SpanOffset::new(0, text.chars().count());
        e[0].modifiers.push(crate::extract::ExtractedModifier {
            modifier_id: "laterality".into(),
            span: SpanOffset::new(67, 71),
            confidence: None,
        });
        let filled = fill_template(&table1_template(), &table1(), &e, &text, "x").unwrap();
        let a = filled.items[0].answer("laterality").unwrap();
        assert_eq!(a.raw_text, "on the right side; left");
        assert!(matches!(a.value, AnswerValue::ValueSet(MappingOutcome::CardinalityViolation { matched: 2, .. })));
    }

    #[test]
    fn errors() {
        let mut t = table1_template();
        t.schema_version = "2.0.0".into();
        assert!(matches!(fill_template(&t, &table1(), &[], "", "x"), Err(FillError::SchemaMismatch { .. })));
        let short = "No suspicious";
        assert!(matches!(
            fill_template(&table1_template(), &table1(), &table1_extraction(), short, "x"),
            Err(FillError::InvalidSpans(_))
        ));
    }

    proptest! {
        #[test]
        fn items_follow_template_order(pick in proptest::sample::subsequence((0..24usize).collect::<Vec<_>>(), 1..24), seed in any::<u64>()) {
            let schema = mammography();
            let mut ids: Vec<String> = pick.iter().map(|&i| schema.facts[i].id.clone()).collect();
            let n = ids.len();
            ids.rotate_left((seed as usize) % n);
            let t = derive_report_template(&schema, "p", &ids, None).unwrap();
            let text = "y".repeat(30);
            let extracted: Vec<ExtractedFact> = schema.facts.iter().enumerate().filter(|(i, _)| (seed >> (i % 64)) & 1 == 1).map(|(_, f)| ExtractedFact {
                fact_id: f.id.clone(), span: SpanOffset::new(0, 30), anchor_id: f.anchor.id.clone(),
                anchor_span: SpanOffset::new(1, 2), modifiers: vec![], confidence: None, anchor_confidence: None,
            }).collect();
            let filled = fill_template(&t, &schema, &extracted, &text, "p").unwrap();
            let got: Vec<&str> = filled.items.iter().map(|i| i.fact_id.as_str()).collect();
            let want: Vec<&str> = ids.iter().map(String::as_str).collect();
            prop_assert_eq!(got, want);
        }
    }
}
