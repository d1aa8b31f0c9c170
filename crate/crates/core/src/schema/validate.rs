use std::collections::HashSet;
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use super::{FactSchema, ModifierRole, ValueSet, ValueStandardizer, ValueUnit, RESERVED_MODIFIER_IDS};
use crate::text::is_normalized;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    EmptySchemaId,
    InvalidVersion,
    InvalidLanguage,
    EmptyFacts,
    InvalidId,
    DuplicateFactId,
    DuplicateAnchorId,
    DuplicateModifierId,
    ReservedModifierId,
    DanglingModifierRef,
    DuplicateModifierRef,
    MultipleNegationModifiers,
    EmptyValueSet,
    EmptyCode,
    DuplicateCode,
    InvalidCardinality,
    CardinalityOrder,
    SynonymNotNormalized,
    LexiconNotNormalized,
    TargetUnitFactor,
    NonPositiveFactor,
    EmptyUnit,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptySchemaId => "EMPTY_SCHEMA_ID",
            ViolationCode::InvalidVersion => "INVALID_VERSION",
            ViolationCode::InvalidLanguage => "INVALID_LANGUAGE",
            ViolationCode::EmptyFacts => "EMPTY_FACTS",
            ViolationCode::InvalidId => "INVALID_ID",
            ViolationCode::DuplicateFactId => "DUPLICATE_FACT_ID",
            ViolationCode::DuplicateAnchorId => "DUPLICATE_ANCHOR_ID",
            ViolationCode::DuplicateModifierId => "DUPLICATE_MODIFIER_ID",
            ViolationCode::ReservedModifierId => "RESERVED_MODIFIER_ID",
            ViolationCode::DanglingModifierRef => "DANGLING_MODIFIER_REF",
            ViolationCode::DuplicateModifierRef => "DUPLICATE_MODIFIER_REF",
            ViolationCode::MultipleNegationModifiers => "MULTIPLE_NEGATION_MODIFIERS",
            ViolationCode::EmptyValueSet => "EMPTY_VALUE_SET",
            ViolationCode::EmptyCode => "EMPTY_CODE",
            ViolationCode::DuplicateCode => "DUPLICATE_CODE",
            ViolationCode::InvalidCardinality => "INVALID_CARDINALITY",
            ViolationCode::CardinalityOrder => "CARDINALITY_ORDER",
            ViolationCode::SynonymNotNormalized => "SYNONYM_NOT_NORMALIZED",
            ViolationCode::LexiconNotNormalized => "LEXICON_NOT_NORMALIZED",
            ViolationCode::TargetUnitFactor => "TARGET_UNIT_FACTOR",
            ViolationCode::NonPositiveFactor => "NON_POSITIVE_FACTOR",
            ViolationCode::EmptyUnit => "EMPTY_UNIT",
        }
    }
}

/// One violated invariant, located by an element path such as
/// `facts[0].modifier_ids[2]` or `modifiers["laterality"].value_set`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code.as_str(), self.path, self.message)
    }
}

pub(crate) fn is_slug(id: &str) -> bool {
    let mut chars = id.chars();
    matches!(chars.next(), Some('a'..='z')) && chars.all(|c| matches!(c, 'a'..='z' | '0'..='9' | '_'))
}

fn is_semver(v: &str) -> bool {
    let parts: Vec<&str> = v.split('.').collect();
    parts.len() == 3
        && parts.iter().all(|p| {
            !p.is_empty() && p.chars().all(|c| c.is_ascii_digit()) && (p.len() == 1 || !p.starts_with('0'))
        })
}

// Structural BCP-47 check: primary subtag of 2-8 letters, then 1-8 alnum subtags.
fn is_language_tag(tag: &str) -> bool {
    let mut parts = tag.split('-');
    let primary = parts.next().unwrap_or_default();
    (2..=8).contains(&primary.len())
        && primary.chars().all(|c| c.is_ascii_alphabetic())
        && parts.all(|p| (1..=8).contains(&p.len()) && p.chars().all(|c| c.is_ascii_alphanumeric()))
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation { code, path: path.into(), message: message.into() });
    }
}

/// Re-checks every schema invariant. An empty result means the canonical
/// serialization of `schema` would be accepted by `parse_fact_schema`.
pub fn validate_schema(schema: &FactSchema) -> Vec<Violation> {
    let mut out = Collector(Vec::new());

    if schema.schema_id.trim().is_empty() {
        out.push(ViolationCode::EmptySchemaId, "schema_id", "schema_id must be nonempty");
    }
    if !is_semver(&schema.version) {
        out.push(ViolationCode::InvalidVersion, "version", format!("{:?} is not MAJOR.MINOR.PATCH", schema.version));
    }
    if !is_language_tag(&schema.language) {
        out.push(ViolationCode::InvalidLanguage, "language", format!("{:?} is not a BCP-47 tag", schema.language));
    }

    let mut modifier_ids = HashSet::new();
    for m in &schema.modifiers {
        let path = format!("modifiers[{:?}]", m.id);
        if !is_slug(&m.id) {
            out.push(ViolationCode::InvalidId, format!("{path}.id"), "modifier id must match [a-z][a-z0-9_]*");
        }
        if RESERVED_MODIFIER_IDS.contains(&m.id.as_str()) {
            out.push(ViolationCode::ReservedModifierId, format!("{path}.id"), format!("{:?} is reserved", m.id));
        }
        if !modifier_ids.insert(m.id.as_str()) {
            out.push(ViolationCode::DuplicateModifierId, format!("{path}.id"), format!("modifier id {:?} repeated", m.id));
        }
        match &m.standardizer {
            ValueStandardizer::ValueSet(vs) => check_value_set(&mut out, &format!("{path}.value_set"), vs),
            ValueStandardizer::ValueUnit(vu) => check_value_unit(&mut out, &format!("{path}.value_unit"), vu),
            ValueStandardizer::FreeText => {}
        }
    }

    if schema.facts.is_empty() {
        out.push(ViolationCode::EmptyFacts, "facts", "a schema needs at least one fact");
    }
    let mut fact_ids = HashSet::new();
    let mut anchor_ids = HashSet::new();
    for (i, fact) in schema.facts.iter().enumerate() {
        let path = format!("facts[{i}]");
        if !is_slug(&fact.id) {
            out.push(ViolationCode::InvalidId, format!("{path}.id"), "fact id must match [a-z][a-z0-9_]*");
        }
        if !fact_ids.insert(fact.id.as_str()) {
            out.push(ViolationCode::DuplicateFactId, format!("{path}.id"), format!("fact id {:?} repeated", fact.id));
        }
        if !is_slug(&fact.anchor.id) {
            out.push(ViolationCode::InvalidId, format!("{path}.anchor.id"), "anchor id must match [a-z][a-z0-9_]*");
        }
        if !anchor_ids.insert(fact.anchor.id.as_str()) {
            out.push(
                ViolationCode::DuplicateAnchorId,
                format!("{path}.anchor.id"),
                format!("anchor id {:?} repeated", fact.anchor.id),
            );
        }
        for (j, entry) in fact.anchor.lexicon.iter().enumerate() {
            if entry.is_empty() || !is_normalized(entry) {
                out.push(
                    ViolationCode::LexiconNotNormalized,
                    format!("{path}.anchor.lexicon[{j}]"),
                    format!("{entry:?} is not a normalized surface form"),
                );
            }
        }
        let mut seen = HashSet::new();
        let mut negations = 0;
        for (j, mid) in fact.modifier_ids.iter().enumerate() {
            let mpath = format!("{path}.modifier_ids[{j}]");
            if !seen.insert(mid.as_str()) {
                out.push(ViolationCode::DuplicateModifierRef, mpath, format!("{mid:?} listed twice"));
                continue;
            }
            match schema.modifier(mid) {
                None => out.push(ViolationCode::DanglingModifierRef, mpath, format!("no modifier {mid:?} in pool")),
                Some(m) if m.role == ModifierRole::Negation => negations += 1,
                Some(_) => {}
            }
        }
        if negations > 1 {
            out.push(
                ViolationCode::MultipleNegationModifiers,
                format!("{path}.modifier_ids"),
                format!("{negations} negation modifiers referenced"),
            );
        }
    }
    out.0
}

fn check_value_set(out: &mut Collector, path: &str, vs: &ValueSet) {
    if vs.values.is_empty() {
        out.push(ViolationCode::EmptyValueSet, path, "value set has no values");
    }
    if vs.max_card == Some(0) {
        out.push(ViolationCode::InvalidCardinality, path, "max_card must be at least 1");
    }
    if let Some(max) = vs.max_card {
        if vs.min_card > max {
            out.push(ViolationCode::CardinalityOrder, path, format!("min_card {} > max_card {max}", vs.min_card));
        }
    }
    let mut codes = HashSet::new();
    for (i, v) in vs.values.iter().enumerate() {
        if v.code.is_empty() {
            out.push(ViolationCode::EmptyCode, format!("{path}.values[{i}].code"), "code must be nonempty");
        }
        if !codes.insert((v.system.as_str(), v.code.as_str())) {
            out.push(
                ViolationCode::DuplicateCode,
                format!("{path}.values[{i}]"),
                format!("{}|{} repeated", v.system, v.code),
            );
        }
        for (j, syn) in v.synonyms.iter().enumerate() {
            if syn.is_empty() || !is_normalized(syn) {
                out.push(
                    ViolationCode::SynonymNotNormalized,
                    format!("{path}.values[{i}].synonyms[{j}]"),
                    format!("{syn:?} is not a normalized surface form"),
                );
            }
        }
    }
}

fn check_value_unit(out: &mut Collector, path: &str, vu: &ValueUnit) {
    match vu.accepted_units.get(&vu.target_unit) {
        Some(f) if *f == Decimal::ONE => {}
        _ => out.push(
            ViolationCode::TargetUnitFactor,
            format!("{path}.accepted_units"),
            format!("target unit {:?} must be accepted with factor 1", vu.target_unit),
        ),
    }
    for (unit, factor) in &vu.accepted_units {
        if unit.trim().is_empty() {
            out.push(ViolationCode::EmptyUnit, format!("{path}.accepted_units"), "empty unit code");
        }
        if *factor <= Decimal::ZERO {
            out.push(
                ViolationCode::NonPositiveFactor,
                format!("{path}.accepted_units[{unit:?}]"),
                format!("factor {factor} must be > 0"),
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{AnchorDef, FactDef};
    use super::*;

    fn codes(schema: &FactSchema) -> Vec<ViolationCode> {
        validate_schema(schema).into_iter().map(|v| v.code).collect()
    }

    fn two_fact_schema() -> FactSchema {
        let mut s = minimal();
        s.facts.push(FactDef {
            id: "calcification".into(),
            label: "Calcification".into(),
            description: String::new(),
            anchor: AnchorDef { id: "calc".into(), label: "Calcification".into(), lexicon: vec!["calcification".into()] },
            modifier_ids: vec![],
        });
        s
    }

    #[test]
    fn valid_two_fact_schema() {
        assert!(validate_schema(&two_fact_schema()).is_empty());
    }

    #[test]
    fn cardinality_order() {
        let mut s = table1();
        let idx = s.modifiers.iter().position(|m| m.id == "laterality").unwrap();
        let ValueStandardizer::ValueSet(vs) = &mut s.modifiers[idx].standardizer else { unreachable!() };
        vs.min_card = 2;
        vs.max_card = Some(1);
        let v = validate_schema(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code, ViolationCode::CardinalityOrder);
        assert_eq!(v[0].path, r#"modifiers["laterality"].value_set"#);
    }

    #[test]
    fn shared_anchor_id() {
        let mut s = two_fact_schema();
        s.facts[0].anchor.id = "mass".into();
        s.facts[1].anchor.id = "mass".into();
        assert_eq!(codes(&s), vec![ViolationCode::DuplicateAnchorId]);
    }

    #[test]
    fn duplicate_ids_and_refs() {
        let mut s = table1();
        s.modifiers.push(s.modifiers[0].clone());
        s.facts.push(s.facts[0].clone());
        let c = codes(&s);
        assert!(c.contains(&ViolationCode::DuplicateModifierId));
        assert!(c.contains(&ViolationCode::DuplicateFactId));
        assert!(c.contains(&ViolationCode::DuplicateAnchorId));

        let mut s = table1();
        let first = s.facts[0].modifier_ids[0].clone();
        s.facts[0].modifier_ids.push(first);
        assert_eq!(codes(&s), vec![ViolationCode::DuplicateModifierRef]);
    }

    #[test]
    fn second_negation_modifier_on_one_fact() {
        let mut s = table1();
        let mut neg2 = s.modifier("negation").unwrap().clone();
        neg2.id = "negation_de".into();
        s.modifiers.push(neg2);
        s.facts[0].modifier_ids.push("negation_de".into());
        assert_eq!(codes(&s), vec![ViolationCode::MultipleNegationModifiers]);
    }

    #[test]
    fn unit_and_surface_checks() {
        let mut s = table1();
        s.facts[0].anchor.lexicon.push("Focal  Findings".into());
        s.modifiers.push(super::super::ModifierDef {
            id: "size".into(),
            label: "Size".into(),
            role: ModifierRole::Plain,
            standardizer: ValueStandardizer::ValueUnit(ValueUnit {
                target_unit: "mm".into(),
                accepted_units: [("mm".to_string(), Decimal::new(2, 0)), ("cm".to_string(), Decimal::ZERO)]
                    .into_iter()
                    .collect(),
            }),
        });
        let c = codes(&s);
        assert!(c.contains(&ViolationCode::LexiconNotNormalized));
        assert!(c.contains(&ViolationCode::TargetUnitFactor));
        assert!(c.contains(&ViolationCode::NonPositiveFactor));
    }

    #[test]
    fn header_fields() {
        let mut s = minimal();
        s.version = "1.0".into();
        s.language = "english!".into();
        s.schema_id = " ".into();
        s.facts[0].id = "Finding".into();
        let c = codes(&s);
        assert_eq!(
            c,
            vec![
                ViolationCode::EmptySchemaId,
                ViolationCode::InvalidVersion,
                ViolationCode::InvalidLanguage,
                ViolationCode::InvalidId
            ]
        );
        assert!(is_language_tag("de-CH"));
        assert!(is_semver("10.2.0"));
        assert!(!is_semver("01.2.0"));
    }

    #[test]
    fn reserved_modifier_ids() {
        let mut s = table1();
        s.modifiers[0].id = "presence".into();
        s.facts[0].modifier_ids[0] = "presence".into();
        assert!(codes(&s).contains(&ViolationCode::ReservedModifierId));
    }

    #[test]
    fn serialized_codes_are_screaming_snake() {
        assert_eq!(serde_json::to_string(&ViolationCode::CardinalityOrder).unwrap(), "\"CARDINALITY_ORDER\"");
        assert_eq!(ViolationCode::DanglingModifierRef.as_str(), "DANGLING_MODIFIER_REF");
    }
}
