use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FactSchema, SchemaRef};

/// One selected fact and the subset of its modifiers to fill.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateEntry {
    pub fact_id: String,
    pub modifier_ids: Vec<String>,
}

/// A subset of a fact schema's facts, pinned to an exact schema version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportTemplate {
    pub template_id: String,
    pub schema_id: String,
    pub schema_version: String,
    pub entries: Vec<TemplateEntry>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template selects no facts")]
    EmptySelection,
    #[error("unknown fact id {0:?}")]
    UnknownFactId(String),
    #[error("fact {0:?} selected twice")]
    DuplicateFact(String),
    #[error("modifier {modifier:?} is not defined for fact {fact:?}")]
    UnknownModifier { fact: String, modifier: String },
    #[error("template targets {template} but schema is {schema}")]
    SchemaMismatch { template: SchemaRef, schema: SchemaRef },
    #[error("malformed template: {0}")]
    Malformed(String),
}

impl ReportTemplate {
    pub fn schema_ref(&self) -> SchemaRef {
        SchemaRef { schema_id: self.schema_id.clone(), schema_version: self.schema_version.clone() }
    }

    pub fn fact_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.fact_id.as_str())
    }

    pub fn entry(&self, fact_id: &str) -> Option<&TemplateEntry> {
        self.entries.iter().find(|e| e.fact_id == fact_id)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, TemplateError> {
        serde_json::from_slice(bytes).map_err(|e| TemplateError::Malformed(e.to_string()))
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("template serializes");
        s.push('\n');
        s
    }

    /// Checks every template invariant against the schema it references.
    pub fn check_against(&self, schema: &FactSchema) -> Result<(), TemplateError> {
        if self.schema_ref() != schema.schema_ref() {
            return Err(TemplateError::SchemaMismatch { template: self.schema_ref(), schema: schema.schema_ref() });
        }
        if self.entries.is_empty() {
            return Err(TemplateError::EmptySelection);
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            let fact = schema.fact(&entry.fact_id).ok_or_else(|| TemplateError::UnknownFactId(entry.fact_id.clone()))?;
            if !seen.insert(entry.fact_id.as_str()) {
                return Err(TemplateError::DuplicateFact(entry.fact_id.clone()));
            }
            let mut mods = HashSet::new();
            for m in &entry.modifier_ids {
                if !fact.modifier_ids.contains(m) || !mods.insert(m.as_str()) {
                    return Err(TemplateError::UnknownModifier { fact: fact.id.clone(), modifier: m.clone() });
                }
            }
        }
        Ok(())
    }
}

/// Projects `schema` onto `fact_ids` (kept in the given order). Without a
/// filter entry a fact carries all its modifiers; with one, the listed subset
/// in the fact's own modifier order.
pub fn derive_report_template(
    schema: &FactSchema,
    template_id: &str,
    fact_ids: &[String],
    modifier_filter: Option<&BTreeMap<String, Vec<String>>>,
) -> Result<ReportTemplate, TemplateError> {
    if fact_ids.is_empty() {
        return Err(TemplateError::EmptySelection);
    }
    let mut entries = Vec::with_capacity(fact_ids.len());
    let mut seen = HashSet::new();
    for id in fact_ids {
        let fact = schema.fact(id).ok_or_else(|| TemplateError::UnknownFactId(id.clone()))?;
        if !seen.insert(id.as_str()) {
            return Err(TemplateError::DuplicateFact(id.clone()));
        }
        let modifier_ids = match modifier_filter.and_then(|f| f.get(id)) {
            None => fact.modifier_ids.clone(),
            Some(subset) => {
                if let Some(bad) = subset.iter().find(|m| !fact.modifier_ids.contains(m)) {
                    return Err(TemplateError::UnknownModifier { fact: id.clone(), modifier: bad.clone() });
                }
                fact.modifier_ids.iter().filter(|m| subset.contains(m)).cloned().collect()
            }
        };
        entries.push(TemplateEntry { fact_id: id.clone(), modifier_ids });
    }
    if let Some(filter) = modifier_filter {
        if let Some(stray) = filter.keys().find(|k| !seen.contains(k.as_str())) {
            return Err(TemplateError::UnknownFactId(stray.clone()));
        }
    }
    Ok(ReportTemplate {
        template_id: template_id.to_string(),
        schema_id: schema.schema_id.clone(),
        schema_version: schema.version.clone(),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn full_projection() {
        let schema = mammography();
        let ids: Vec<String> = schema.facts.iter().map(|f| f.id.clone()).collect();
        let t = derive_report_template(&schema, "full", &ids, None).unwrap();
        assert_eq!(t.entries.len(), 24);
        for (entry, fact) in t.entries.iter().zip(&schema.facts) {
            assert_eq!(entry.fact_id, fact.id);
            assert_eq!(entry.modifier_ids, fact.modifier_ids);
        }
        t.check_against(&schema).unwrap();
    }

    #[test]
    fn single_fact() {
        let schema = table1();
        let t = derive_report_template(&schema, "t1", &["mass_described".into()], None).unwrap();
        assert_eq!(t.entries, vec![TemplateEntry {
            fact_id: "mass_described".into(),
            modifier_ids: vec!["negation".into(), "dignity".into(), "laterality".into()],
        }]);
        assert_eq!(t.schema_ref(), schema.schema_ref());
    }

    #[test]
    fn modifier_subset_keeps_fact_order() {
        let schema = table1();
        let filter: BTreeMap<String, Vec<String>> =
            [("mass_described".to_string(), vec!["laterality".to_string(), "negation".to_string()])].into();
        let t = derive_report_template(&schema, "t", &["mass_described".into()], Some(&filter)).unwrap();
        assert_eq!(t.entries[0].modifier_ids, vec!["negation", "laterality"]);
    }

    #[test]
    fn errors() {
        let schema = table1();
        assert_eq!(
            derive_report_template(&schema, "t", &["nonexistent".into()], None),
            Err(TemplateError::UnknownFactId("nonexistent".into()))
        );
        assert_eq!(derive_report_template(&schema, "t", &[], None), Err(TemplateError::EmptySelection));
        let filter: BTreeMap<String, Vec<String>> = [("mass_described".to_string(), vec!["size".to_string()])].into();
        assert!(matches!(
            derive_report_template(&schema, "t", &["mass_described".into()], Some(&filter)),
            Err(TemplateError::UnknownModifier { .. })
        ));
    }

    #[test]
    fn check_against_detects_version_skew() {
        let schema = table1();
        let mut t = derive_report_template(&schema, "t", &["mass_described".into()], None).unwrap();
        t.schema_version = "9.9.9".into();
        assert!(matches!(t.check_against(&schema), Err(TemplateError::SchemaMismatch { .. })));
    }
}
