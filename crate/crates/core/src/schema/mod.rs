//! The fact schema: facts, anchor entities, pooled modifiers and the value
//! standardizers (value sets, value units) used during template filling.
//!
//! The canonical JSON layout is a top-level object with `schema_id`,
//! `version`, `language`, `modifiers` and `facts`. Writing always goes through
//! [`FactSchema::to_canonical_json`], whose key order is fixed by the struct
//! definitions below, so a parse/serialize cycle is a fixed point.

mod template;
mod uima;
mod validate;

use std::collections::BTreeMap;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use template::{derive_report_template, ReportTemplate, TemplateEntry, TemplateError};
pub use uima::{export_uima_type_system, UIMA_NAMESPACE};
pub use validate::{validate_schema, Violation, ViolationCode};

/// Modifier ids that would collide with the fixed per-fact questionnaire items.
pub const RESERVED_MODIFIER_IDS: [&str; 2] = ["presence", "anchor"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedValue {
    pub code: String,
    pub system: String,
    pub display: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueSet {
    pub values: Vec<CodedValue>,
    pub min_card: u32,
    /// `None` means unbounded.
    pub max_card: Option<u32>,
}

impl ValueSet {
    pub fn allows(&self, count: usize) -> bool {
        count as u64 >= u64::from(self.min_card) && self.max_card.is_none_or(|max| count as u64 <= u64::from(max))
    }

    pub fn is_multiple_choice(&self) -> bool {
        self.max_card != Some(1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueUnit {
    /// UCUM code of the standardized unit.
    pub target_unit: String,
    /// UCUM code → factor converting one source unit into `target_unit`.
    pub accepted_units: BTreeMap<String, Decimal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueStandardizer {
    ValueSet(ValueSet),
    ValueUnit(ValueUnit),
    FreeText,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModifierRole {
    Plain,
    Negation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierDef {
    pub id: String,
    pub label: String,
    pub role: ModifierRole,
    pub standardizer: ValueStandardizer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorDef {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub lexicon: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactDef {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub description: String,
    pub anchor: AnchorDef,
    #[serde(default)]
    pub modifier_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactSchema {
    pub schema_id: String,
    pub version: String,
    pub language: String,
    #[serde(default)]
    pub modifiers: Vec<ModifierDef>,
    pub facts: Vec<FactDef>,
}

/// (facts, anchors, modifiers)
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SchemaCounts {
    pub facts: usize,
    pub anchors: usize,
    pub modifiers: usize,
}

impl std::fmt::Display for SchemaCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} facts / {} anchors / {} modifiers", self.facts, self.anchors, self.modifiers)
    }
}

/// `schema_id` + exact `version` pin.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemaRef {
    pub schema_id: String,
    pub schema_version: String,
}

impl std::fmt::Display for SchemaRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}@{}", self.schema_id, self.schema_version)
    }
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("malformed fact schema: {0}")]
    MalformedInput(String),
    #[error("fact schema violates {} invariant(s); first: {}", .0.len(), .0[0])]
    SchemaInvariantViolation(Vec<Violation>),
}

impl FactSchema {
    pub fn counts(&self) -> SchemaCounts {
        SchemaCounts { facts: self.facts.len(), anchors: self.facts.len(), modifiers: self.modifiers.len() }
    }

    pub fn schema_ref(&self) -> SchemaRef {
        SchemaRef { schema_id: self.schema_id.clone(), schema_version: self.version.clone() }
    }

    pub fn fact(&self, id: &str) -> Option<&FactDef> {
        self.facts.iter().find(|f| f.id == id)
    }

    pub fn modifier(&self, id: &str) -> Option<&ModifierDef> {
        self.modifiers.iter().find(|m| m.id == id)
    }

    pub fn anchor_ids(&self) -> impl Iterator<Item = &str> {
        self.facts.iter().map(|f| f.anchor.id.as_str())
    }

    /// The negation-role modifier referenced by `fact`, if any.
    pub fn negation_modifier(&self, fact: &FactDef) -> Option<&ModifierDef> {
        fact.modifier_ids
            .iter()
            .filter_map(|id| self.modifier(id))
            .find(|m| m.role == ModifierRole::Negation)
    }

    /// Canonical pretty-printed JSON with a trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("schema serializes");
        s.push('\n');
        s
    }
}

/// Parses and fully validates a fact schema.
pub fn parse_fact_schema(bytes: &[u8]) -> Result<FactSchema, SchemaError> {
    let schema: FactSchema =
        serde_json::from_slice(bytes).map_err(|e| SchemaError::MalformedInput(e.to_string()))?;
    let violations = validate_schema(&schema);
    if violations.is_empty() {
        Ok(schema)
    } else {
        Err(SchemaError::SchemaInvariantViolation(violations))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const TABLE1_SCHEMA: &str = include_str!("../../fixtures/table1_schema.json");
    pub const MAMMOGRAPHY_SCHEMA: &str = include_str!("../../fixtures/mammography_schema.json");

    pub fn table1() -> FactSchema {
        parse_fact_schema(TABLE1_SCHEMA.as_bytes()).unwrap()
    }

    pub fn mammography() -> FactSchema {
        parse_fact_schema(MAMMOGRAPHY_SCHEMA.as_bytes()).unwrap()
    }

    pub fn minimal() -> FactSchema {
        FactSchema {
            schema_id: "minimal".into(),
            version: "0.1.0".into(),
            language: "en".into(),
            modifiers: vec![],
            facts: vec![FactDef {
                id: "finding".into(),
                label: "Finding".into(),
                description: String::new(),
                anchor: AnchorDef { id: "finding_anchor".into(), label: "Finding".into(), lexicon: vec![] },
                modifier_ids: vec![],
            }],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn case_study_sized_schema_counts() {
        let schema = mammography();
        assert_eq!(schema.counts(), SchemaCounts { facts: 24, anchors: 24, modifiers: 66 });
    }

    #[test]
    fn minimal_schema_is_valid() {
        let json = minimal().to_canonical_json();
        let parsed = parse_fact_schema(json.as_bytes()).unwrap();
        assert_eq!(parsed.counts(), SchemaCounts { facts: 1, anchors: 1, modifiers: 0 });
    }

    #[test]
    fn dangling_modifier_reports_path() {
        let mut schema = table1();
        schema.facts[0].modifier_ids.push("lateralityy".into());
        let err = parse_fact_schema(schema.to_canonical_json().as_bytes()).unwrap_err();
        let SchemaError::SchemaInvariantViolation(v) = err else { panic!("expected violation") };
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::DanglingModifierRef);
        assert_eq!(v[0].path, "facts[0].modifier_ids[3]");
    }

    #[test]
    fn malformed_json_is_rejected() {
        assert!(matches!(parse_fact_schema(b"{not json"), Err(SchemaError::MalformedInput(_))));
        assert!(matches!(parse_fact_schema(br#"{"schema_id":"x"}"#), Err(SchemaError::MalformedInput(_))));
    }

    #[test]
    fn standardizer_variants_are_exclusive() {
        let both = r#"{"value_set":{"values":[],"min_card":0,"max_card":1},"value_unit":{"target_unit":"mm","accepted_units":{}}}"#;
        assert!(serde_json::from_str::<ValueStandardizer>(both).is_err());
        assert_eq!(serde_json::from_str::<ValueStandardizer>(r#""free_text""#).unwrap(), ValueStandardizer::FreeText);
    }

    #[test]
    fn canonical_serialization_is_fixed_point() {
        let schema = table1();
        let once = schema.to_canonical_json();
        let twice = parse_fact_schema(once.as_bytes()).unwrap().to_canonical_json();
        assert_eq!(once, twice);
        assert_eq!(once, TABLE1_SCHEMA, "fixture is stored in canonical form");
    }
}
