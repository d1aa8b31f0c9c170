//! Template ↔ Questionnaire mapping.
//!
//! One repeating group per fact (linkId = fact id) holding `{fact}.presence`,
//! `{fact}.anchor` and one `{fact}.{modifier}` item per selected modifier.

use std::collections::HashSet;

use super::*;
use crate::schema::{FactSchema, ReportTemplate, TemplateEntry, ValueStandardizer};

fn modifier_item(fact_id: &str, schema: &FactSchema, mid: &str) -> QuestionnaireItem {
    let def = schema.modifier(mid).expect("template checked against schema");
    let mut item = QuestionnaireItem {
        link_id: format!("{fact_id}.{mid}"),
        text: Some(def.label.clone()),
        item_type: ItemType::String,
        repeats: false,
        answer_option: Vec::new(),
        extension: Vec::new(),
        item: Vec::new(),
    };
    match &def.standardizer {
        ValueStandardizer::FreeText => {}
        ValueStandardizer::ValueSet(vs) => {
            item.item_type = ItemType::Choice;
            item.repeats = vs.is_multiple_choice();
            item.answer_option = vs
                .values
                .iter()
                .map(|v| AnswerOption {
                    value_coding: Coding { system: v.system.clone(), code: v.code.clone(), display: v.display.clone() },
                })
                .collect();
        }
        ValueStandardizer::ValueUnit(vu) => {
            item.item_type = ItemType::Quantity;
            item.extension.push(Extension {
                url: EXT_QUESTIONNAIRE_UNIT.into(),
                value_coding: Some(Coding {
                    system: UCUM.into(),
                    code: vu.target_unit.clone(),
                    display: vu.target_unit.clone(),
                }),
                ..Default::default()
            });
        }
    }
    item
}

fn leaf(link_id: String, text: &str, item_type: ItemType) -> QuestionnaireItem {
    QuestionnaireItem {
        link_id,
        text: Some(text.into()),
        item_type,
        repeats: false,
        answer_option: Vec::new(),
        extension: Vec::new(),
        item: Vec::new(),
    }
}

/// Deterministic: equal inputs give byte-identical JSON.
pub fn template_to_questionnaire(template: &ReportTemplate, schema: &FactSchema) -> Result<Questionnaire, FhirError> {
    if template.schema_ref() != schema.schema_ref() {
        return Err(FhirError::SchemaMismatch { questionnaire: template.schema_ref(), schema: schema.schema_ref() });
    }
    template.check_against(schema).map_err(|e| FhirError::InvalidTemplate(e.to_string()))?;
    let item = template
        .entries
        .iter()
        .map(|entry| {
            let fact = schema.fact(&entry.fact_id).expect("checked");
            let mut children = vec![
                leaf(format!("{}.{PRESENCE}", fact.id), "Present", ItemType::Boolean),
                leaf(format!("{}.{ANCHOR}", fact.id), &fact.anchor.label, ItemType::String),
            ];
            children.extend(entry.modifier_ids.iter().map(|m| modifier_item(&fact.id, schema, m)));
            QuestionnaireItem {
                link_id: fact.id.clone(),
                text: Some(fact.label.clone()),
                item_type: ItemType::Group,
                repeats: true,
                answer_option: Vec::new(),
                extension: Vec::new(),
                item: children,
            }
        })
        .collect();
    Ok(Questionnaire {
        resource_type: "Questionnaire".into(),
        id: template.template_id.clone(),
        status: "active".into(),
        title: Some(template.template_id.clone()),
        extension: vec![Extension::string(EXT_SCHEMA, format!("{}|{}", schema.schema_id, schema.version))],
        item,
    })
}

/// Left inverse of [`template_to_questionnaire`]. Only linkIds matter; the
/// anchor and presence items may be omitted.
pub fn questionnaire_to_template(q: &Questionnaire, schema: &FactSchema) -> Result<ReportTemplate, FhirError> {
    if q.resource_type != "Questionnaire" {
        return Err(FhirError::Malformed(format!("resourceType is {:?}", q.resource_type)));
    }
    if q.item.is_empty() {
        return Err(FhirError::EmptyQuestionnaire);
    }
    let target = q.schema_ref()?;
    if target != schema.schema_ref() {
        return Err(FhirError::SchemaMismatch { questionnaire: target, schema: schema.schema_ref() });
    }
    let mut entries = Vec::with_capacity(q.item.len());
    let mut seen = HashSet::new();
    for group in &q.item {
        let fact = schema.fact(&group.link_id).ok_or_else(|| FhirError::UnknownLinkId(group.link_id.clone()))?;
        if !seen.insert(fact.id.as_str()) {
            return Err(FhirError::Malformed(format!("fact group {:?} appears twice", fact.id)));
        }
        let mut modifier_ids: Vec<String> = Vec::new();
        for child in &group.item {
            let rest = child
                .link_id
                .strip_prefix(fact.id.as_str())
                .and_then(|r| r.strip_prefix('.'))
                .ok_or_else(|| FhirError::UnknownLinkId(child.link_id.clone()))?;
            match rest {
                PRESENCE | ANCHOR => {}
                m if fact.modifier_ids.iter().any(|x| x == m) => {
                    if modifier_ids.iter().any(|x| x == m) {
                        return Err(FhirError::Malformed(format!("linkId {:?} appears twice", child.link_id)));
                    }
                    modifier_ids.push(m.to_string());
                }
                _ => return Err(FhirError::UnknownLinkId(child.link_id.clone())),
            }
        }
        entries.push(TemplateEntry { fact_id: fact.id.clone(), modifier_ids });
    }
    let template = ReportTemplate {
        template_id: q.id.clone(),
        schema_id: schema.schema_id.clone(),
        schema_version: schema.version.clone(),
        entries,
    };
    template.check_against(schema).map_err(|e| FhirError::InvalidTemplate(e.to_string()))?;
    Ok(template)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::derive_report_template;
    use crate::schema::fixtures::{mammography, table1};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn t1() -> ReportTemplate {
        derive_report_template(&table1(), "t1", &["mass_described".to_string()], None).unwrap()
    }

    #[test]
    fn table1_questionnaire() {
        let q = template_to_questionnaire(&t1(), &table1()).unwrap();
        assert_eq!(q.item.len(), 1);
        assert_eq!(q.item[0].link_id, "mass_described");
        let ids: Vec<&str> = q.item[0].item.iter().map(|i| i.link_id.as_str()).collect();
        assert_eq!(
            ids,
            [
                "mass_described.presence",
                "mass_described.anchor",
                "mass_described.negation",
                "mass_described.dignity",
                "mass_described.laterality"
            ]
        );
        let lat = q.find("mass_described.laterality").unwrap();
        assert_eq!(lat.item_type, ItemType::Choice);
        assert!(!lat.repeats);
        let codes: Vec<&str> = lat.answer_option.iter().map(|o| o.value_coding.code.as_str()).collect();
        assert_eq!(codes, ["7771000", "24028007", "261665006"]);
        assert_eq!(lat.answer_option[2].value_coding.display, "Unknown");
        assert_eq!(q.schema_ref().unwrap(), table1().schema_ref());
    }

    #[test]
    fn subset_and_determinism() {
        let filter = BTreeMap::from([("mass_described".to_string(), vec!["laterality".to_string()])]);
        let t = derive_report_template(&table1(), "t", &["mass_described".to_string()], Some(&filter)).unwrap();
        let q = template_to_questionnaire(&t, &table1()).unwrap();
        assert_eq!(q.item[0].item.len(), 3);
        assert_eq!(q.item[0].item[2].link_id, "mass_described.laterality");
        assert_eq!(q.to_json(), template_to_questionnaire(&t, &table1()).unwrap().to_json());
    }

    #[test]
    fn quantity_items_carry_the_target_unit() {
        let schema = mammography();
        let t = derive_report_template(&schema, "m", &[schema.facts[0].id.clone()], None).unwrap();
        let q = template_to_questionnaire(&t, &schema).unwrap();
        let size = q.find(&format!("{}.size", schema.facts[0].id)).unwrap();
        assert_eq!(size.item_type, ItemType::Quantity);
        assert_eq!(size.extension[0].value_coding.as_ref().unwrap().code, "mm");
    }

    #[test]
    fn full_mammography_round_trip() {
        let schema = mammography();
        let ids: Vec<String> = schema.facts.iter().map(|f| f.id.clone()).collect();
        let t = derive_report_template(&schema, "full", &ids, None).unwrap();
        let q = template_to_questionnaire(&t, &schema).unwrap();
        let parsed = Questionnaire::from_json(q.to_json().as_bytes()).unwrap();
        assert_eq!(parsed, q);
        assert_eq!(questionnaire_to_template(&parsed, &schema).unwrap(), t);
    }

    #[test]
    fn inverse_errors() {
        let schema = table1();
        let mut q = template_to_questionnaire(&t1(), &schema).unwrap();
        q.item[0].item.remove(1);
        assert_eq!(questionnaire_to_template(&q, &schema).unwrap(), t1());

        let mut ghost = q.clone();
        ghost.item[0].item[1].link_id = "ghost.fact".into();
        assert_eq!(questionnaire_to_template(&ghost, &schema), Err(FhirError::UnknownLinkId("ghost.fact".into())));
        let mut ghost = q.clone();
        ghost.item[0].link_id = "ghost".into();
        assert_eq!(questionnaire_to_template(&ghost, &schema), Err(FhirError::UnknownLinkId("ghost".into())));

        let mut empty = q.clone();
        empty.item.clear();
        assert_eq!(questionnaire_to_template(&empty, &schema), Err(FhirError::EmptyQuestionnaire));

        let mut other = q.clone();
        other.extension[0].value_string = Some("table1_example|2.0.0".into());
        assert!(matches!(questionnaire_to_template(&other, &schema), Err(FhirError::SchemaMismatch { .. })));

        let mut bare = q;
        bare.extension.clear();
        assert!(matches!(questionnaire_to_template(&bare, &schema), Err(FhirError::Malformed(_))));
        assert!(Questionnaire::from_json(b"{\"item\": []}").is_err());
    }

    /// Random fact subsets in random order, each with a random modifier subset
    /// in random order.
    fn templates() -> impl proptest::strategy::Strategy<Value = ReportTemplate> {
        let schema = mammography();
        let facts: Vec<(String, Vec<String>)> =
            schema.facts.iter().map(|f| (f.id.clone(), f.modifier_ids.clone())).collect();
        Just(facts)
            .prop_shuffle()
            .prop_flat_map(|facts| {
                let n = facts.len();
                (Just(facts), 1..=n)
            })
            .prop_flat_map(|(facts, k)| {
                let entries: Vec<_> = facts
                    .into_iter()
                    .take(k)
                    .map(|(id, mods)| {
                        let m = mods.len();
                        (Just(id), Just(mods).prop_shuffle(), 0..=m)
                            .prop_map(|(id, mods, j)| TemplateEntry { fact_id: id, modifier_ids: mods[..j].to_vec() })
                    })
                    .collect();
                (entries, "[a-z0-9_-]{0,12}")
            })
            .prop_map(move |(entries, id)| ReportTemplate {
                template_id: id,
                schema_id: schema.schema_id.clone(),
                schema_version: schema.version.clone(),
                entries,
            })
    }

    proptest! {
        #[test]
        fn round_trip_over_generated_templates(t in templates()) {
            let schema = mammography();
            let q = template_to_questionnaire(&t, &schema).unwrap();
            let ids = q.link_ids();
            prop_assert_eq!(ids.iter().collect::<HashSet<_>>().len(), ids.len());
            let wire = Questionnaire::from_json(q.to_json().as_bytes()).unwrap();
            prop_assert_eq!(questionnaire_to_template(&wire, &schema).unwrap(), t);
        }
    }
}
