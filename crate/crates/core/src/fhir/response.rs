//! FilledTemplate → QuestionnaireResponse.

use std::collections::HashMap;

use super::*;
use crate::fill::{
    AnswerValue, FactStatus, FilledItem, FilledTemplate, MappingOutcome, ModifierAnswer, QuantityOutcome,
};

fn quantity_number(v: &rust_decimal::Decimal) -> serde_json::Number {
    serde_json::from_str(&v.normalize().to_string()).expect("decimal renders as a JSON number")
}

fn modifier_item(link_id: String, answer: &ModifierAnswer) -> ResponseItem {
    let mut item = ResponseItem { link_id, extension: Vec::new(), answer: Vec::new(), item: Vec::new() };
    let unanswered = |item: &mut ResponseItem, kind: &str| {
        item.extension.push(Extension::code(EXT_MAPPING_OUTCOME, kind));
        item.extension.push(Extension::string(EXT_UNMAPPED, answer.raw_text.clone()));
    };
    match &answer.value {
        AnswerValue::FreeText(s) => {
            item.answer.push(Answer { value_string: Some(s.clone()), ..Default::default() });
        }
        AnswerValue::ValueSet(MappingOutcome::Mapped { codes }) => {
            item.answer.extend(codes.iter().map(|c| Answer {
                value_coding: Some(Coding { system: c.system.clone(), code: c.code.clone(), display: c.display.clone() }),
                ..Default::default()
            }));
        }
        AnswerValue::ValueSet(other) => unanswered(&mut item, other.kind()),
        AnswerValue::ValueUnit(QuantityOutcome::Quantity { quantity }) => {
            item.answer.push(Answer {
                value_quantity: Some(FhirQuantity {
                    value: quantity_number(&quantity.value),
                    unit: quantity.unit.clone(),
                    system: UCUM.into(),
                    code: quantity.unit.clone(),
                }),
                ..Default::default()
            });
        }
        AnswerValue::ValueUnit(QuantityOutcome::Unmapped { .. }) => unanswered(&mut item, "unmapped"),
    }
    item
}

fn group(
    q_group: &QuestionnaireItem,
    status: FactStatus,
    anchor_text: &str,
    answers: &[ModifierAnswer],
) -> ResponseItem {
    let fact = &q_group.link_id;
    let wanted: HashMap<&str, &QuestionnaireItem> = q_group.item.iter().map(|i| (i.link_id.as_str(), i)).collect();
    let presence_id = format!("{fact}.{PRESENCE}");
    let mut children = Vec::new();
    if wanted.contains_key(presence_id.as_str()) {
        let mut presence = ResponseItem {
            link_id: presence_id,
            extension: Vec::new(),
            answer: vec![Answer { value_boolean: Some(status == FactStatus::Present), ..Default::default() }],
            item: Vec::new(),
        };
        if status == FactStatus::Negated {
            presence.extension.push(Extension::boolean(EXT_NEGATED, true));
        }
        children.push(presence);
    }
    if status != FactStatus::Absent {
        let anchor_id = format!("{fact}.{ANCHOR}");
        if wanted.contains_key(anchor_id.as_str()) {
            children.push(ResponseItem {
                link_id: anchor_id,
                extension: Vec::new(),
                answer: vec![Answer { value_string: Some(anchor_text.to_string()), ..Default::default() }],
                item: Vec::new(),
            });
        }
        // Questionnaire order, not extraction order.
        for q_child in &q_group.item {
            let Some(mid) = q_child.link_id.strip_prefix(fact.as_str()).and_then(|r| r.strip_prefix('.')) else {
                continue;
            };
            if let Some(a) = answers.iter().find(|a| a.modifier_id == mid) {
                children.push(modifier_item(q_child.link_id.clone(), a));
            }
        }
    }
    let mut extension = Vec::new();
    if status == FactStatus::Negated {
        extension.push(Extension::boolean(EXT_NEGATED, true));
    }
    ResponseItem { link_id: fact.clone(), extension, answer: Vec::new(), item: children }
}

fn groups_for(q_group: &QuestionnaireItem, item: Option<&FilledItem>) -> Vec<ResponseItem> {
    let Some(item) = item else { return vec![group(q_group, FactStatus::Absent, "", &[])] };
    let mut out = vec![group(q_group, item.status, &item.anchor_text, &item.modifier_answers)];
    out.extend(item.repeats.iter().map(|r| group(q_group, r.status, &r.anchor_text, &r.modifier_answers)));
    out
}

/// Renders a filled template against the Questionnaire it was filled from.
///
/// Absent facts answer presence=false and nothing else. Negated facts answer
/// presence=false, carry the negated extension and keep their modifier
/// answers. Later instances of a fact become additional groups with the same
/// linkId.
pub fn filled_to_response(filled: &FilledTemplate, q: &Questionnaire) -> QuestionnaireResponse {
    let item = q.item.iter().flat_map(|g| groups_for(g, filled.item(&g.link_id))).collect();
    QuestionnaireResponse {
        resource_type: "QuestionnaireResponse".into(),
        questionnaire: format!("Questionnaire/{}", q.id),
        status: "completed".into(),
        extension: vec![
            Extension::string(EXT_REPORT_SHA256, filled.report_sha256.clone()),
            Extension::string(EXT_EXTRACTOR, filled.extractor.clone()),
        ],
        item,
    }
}

/// Checks a response against its Questionnaire. Returns every violation:
/// linkIds that are missing from the questionnaire or sit at a different
/// place in the tree, and codings that are not offered as answer options.
pub fn response_conformance(r: &QuestionnaireResponse, q: &Questionnaire) -> Vec<String> {
    fn walk(r_items: &[ResponseItem], q_items: &[QuestionnaireItem], path: &str, out: &mut Vec<String>) {
        for ri in r_items {
            let Some(qi) = q_items.iter().find(|q| q.link_id == ri.link_id) else {
                out.push(format!("{path}/{} is not a questionnaire item here", ri.link_id));
                continue;
            };
            for a in &ri.answer {
                if let Some(c) = &a.value_coding {
                    let offered = qi.answer_option.iter().any(|o| o.value_coding.system == c.system && o.value_coding.code == c.code);
                    if !offered {
                        out.push(format!("{path}/{} answers {}|{} which is not an answer option", ri.link_id, c.system, c.code));
                    }
                }
            }
            walk(&ri.item, &qi.item, &format!("{path}/{}", ri.link_id), out);
        }
    }
    let mut out = Vec::new();
    if r.questionnaire != format!("Questionnaire/{}", q.id) {
        out.push(format!("response references {} instead of Questionnaire/{}", r.questionnaire, q.id));
    }
    walk(&r.item, &q.item, "", &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cas::fixtures::{table1_doc, TABLE1_TEXT};
    use crate::extract::ExtractedFact;
    use crate::fill::fill_template;
    use crate::schema::derive_report_template;
    use crate::schema::fixtures::{mammography, table1};
    use crate::text::SpanOffset;

    fn table1_response() -> (Questionnaire, QuestionnaireResponse) {
        let schema = table1();
        let t = derive_report_template(&schema, "t1", &["mass_described".to_string()], None).unwrap();
        let q = template_to_questionnaire(&t, &schema).unwrap();
        let extracted = vec![ExtractedFact::from_annotation(&table1_doc().annotations[0])];
        let filled = fill_template(&t, &schema, &extracted, TABLE1_TEXT, "baseline").unwrap();
        let r = filled_to_response(&filled, &q);
        (q, r)
    }

    #[test]
    fn table1_response_shape() {
        let (q, r) = table1_response();
        assert!(response_conformance(&r, &q).is_empty());
        let g = &r.item[0];
        assert_eq!(g.extension(EXT_NEGATED).and_then(|e| e.value_boolean), Some(true));
        let presence = g.child("mass_described.presence").unwrap();
        assert_eq!(presence.answer[0].value_boolean, Some(false));
        assert_eq!(presence.extension(EXT_NEGATED).and_then(|e| e.value_boolean), Some(true));
        let lat = g.child("mass_described.laterality").unwrap();
        assert_eq!(lat.answer[0].value_coding.as_ref().unwrap().code, "24028007");
        let dig = g.child("mass_described.dignity").unwrap();
        assert_eq!(dig.answer[0].value_string.as_deref(), Some("suspicious"));
        assert_eq!(g.child("mass_described.anchor").unwrap().answer[0].value_string.as_deref(), Some("focal findings"));
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(json["resourceType"], "QuestionnaireResponse");
        assert_eq!(json["questionnaire"], "Questionnaire/t1");
    }

    #[test]
    fn absent_facts_answer_presence_only() {
        let schema = mammography();
        let ids: Vec<String> = schema.facts.iter().take(3).map(|f| f.id.clone()).collect();
        let t = derive_report_template(&schema, "m", &ids, None).unwrap();
        let q = template_to_questionnaire(&t, &schema).unwrap();
        let filled = fill_template(&t, &schema, &[], "Unauffällig.", "baseline").unwrap();
        let r = filled_to_response(&filled, &q);
        assert_eq!(r.item.len(), 3);
        for g in &r.item {
            assert_eq!(g.item.len(), 1);
            assert_eq!(g.item[0].answer[0].value_boolean, Some(false));
            assert!(g.extension.is_empty());
        }
        assert!(response_conformance(&r, &q).is_empty());
    }

    #[test]
    fn quantities_unmapped_and_repeats() {
        let schema = mammography();
        let fact = &schema.facts[0];
        let t = derive_report_template(&schema, "m", &[fact.id.clone()], None).unwrap();
        let q = template_to_questionnaire(&t, &schema).unwrap();
        let text = "Herd 1,5 cm groß. Herd ca. groß.";
        let mk = |b: usize, e: usize, qb: usize, qe: usize| ExtractedFact {
            fact_id: fact.id.clone(),
            span: SpanOffset::new(b, e),
            anchor_id: fact.anchor.id.clone(),
            anchor_span: SpanOffset::new(b, b + 4),
            modifiers: vec![crate::extract::ExtractedModifier {
                modifier_id: "size".into(),
                span: SpanOffset::new(qb, qe),
                confidence: None,
            }],
            confidence: None,
            anchor_confidence: None,
        };
        let filled = fill_template(&t, &schema, &[mk(0, 17, 5, 11), mk(18, 32, 23, 31)], text, "x").unwrap();
        let r = filled_to_response(&filled, &q);
        assert!(response_conformance(&r, &q).is_empty());
        let groups: Vec<&ResponseItem> = r.groups(&fact.id).collect();
        assert_eq!(groups.len(), 2);
        let size_id = format!("{}.size", fact.id);
        let qty = groups[0].child(&size_id).unwrap().answer[0].value_quantity.clone().unwrap();
        assert_eq!((qty.value.to_string().as_str(), qty.code.as_str()), ("15", "mm"));
        let unmapped = groups[1].child(&size_id).unwrap();
        assert!(unmapped.answer.is_empty());
        assert_eq!(unmapped.extension(EXT_UNMAPPED).unwrap().value_string.as_deref(), Some("ca. groß"));
    }

    #[test]
    fn conformance_flags_foreign_items_and_codings() {
        let (q, mut r) = table1_response();
        r.item[0].item[4].answer[0].value_coding.as_mut().unwrap().code = "999".into();
        r.item[0].item.push(ResponseItem { link_id: "ghost".into(), extension: vec![], answer: vec![], item: vec![] });
        assert_eq!(response_conformance(&r, &q).len(), 2);
    }
}
