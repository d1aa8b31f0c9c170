//! Minimal structural FHIR profile for templates and filled templates.
//!
//! Only the JSON shape used on the wire is modelled. Full FHIR conformance
//! checking is out of scope.

mod questionnaire;
mod response;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::SchemaRef;

pub use questionnaire::{questionnaire_to_template, template_to_questionnaire};
pub use response::{filled_to_response, response_conformance};

pub const EXT_SCHEMA: &str = "urn:radex:extension:schema";
pub const EXT_NEGATED: &str = "urn:radex:extension:negated";
pub const EXT_UNMAPPED: &str = "urn:radex:extension:unmapped";
pub const EXT_MAPPING_OUTCOME: &str = "urn:radex:extension:mapping-outcome";
pub const EXT_REPORT_SHA256: &str = "urn:radex:extension:report-sha256";
pub const EXT_EXTRACTOR: &str = "urn:radex:extension:extractor";
pub const EXT_QUESTIONNAIRE_UNIT: &str = "http://hl7.org/fhir/StructureDefinition/questionnaire-unit";
pub const UCUM: &str = "http://unitsofmeasure.org";

pub(crate) const PRESENCE: &str = "presence";
pub(crate) const ANCHOR: &str = "anchor";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coding {
    pub system: String,
    pub code: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub display: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Extension {
    pub url: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_string: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_boolean: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_coding: Option<Coding>,
}

impl Extension {
    pub fn string(url: &str, v: impl Into<String>) -> Self {
        Extension { url: url.into(), value_string: Some(v.into()), ..Default::default() }
    }

    pub fn boolean(url: &str, v: bool) -> Self {
        Extension { url: url.into(), value_boolean: Some(v), ..Default::default() }
    }

    pub fn code(url: &str, v: impl Into<String>) -> Self {
        Extension { url: url.into(), value_code: Some(v.into()), ..Default::default() }
    }
}

pub(crate) fn find_ext<'a>(exts: &'a [Extension], url: &str) -> Option<&'a Extension> {
    exts.iter().find(|e| e.url == url)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemType {
    Group,
    Boolean,
    String,
    Choice,
    Quantity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnswerOption {
    pub value_coding: Coding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuestionnaireItem {
    pub link_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(rename = "type")]
    pub item_type: ItemType,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeats: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answer_option: Vec<AnswerOption>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub item: Vec<QuestionnaireItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Questionnaire {
    pub resource_type: String,
    #[serde(default)]
    pub id: String,
    #[serde(default = "active")]
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default)]
    pub item: Vec<QuestionnaireItem>,
}

fn active() -> String {
    "active".into()
}

impl Questionnaire {
    pub fn from_json(bytes: &[u8]) -> Result<Self, FhirError> {
        serde_json::from_slice(bytes).map_err(|e| FhirError::Malformed(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("questionnaire serializes");
        s.push('\n');
        s
    }

    /// The schema reference carried in the schema extension.
    pub fn schema_ref(&self) -> Result<SchemaRef, FhirError> {
        let raw = find_ext(&self.extension, EXT_SCHEMA)
            .and_then(|e| e.value_string.as_deref())
            .ok_or_else(|| FhirError::Malformed(format!("missing {EXT_SCHEMA} extension")))?;
        let (id, version) = raw
            .split_once('|')
            .ok_or_else(|| FhirError::Malformed(format!("schema extension {raw:?} is not id|version")))?;
        Ok(SchemaRef { schema_id: id.into(), schema_version: version.into() })
    }

    /// Every linkId in the item tree, depth first.
    pub fn link_ids(&self) -> Vec<&str> {
        fn walk<'a>(items: &'a [QuestionnaireItem], out: &mut Vec<&'a str>) {
            for i in items {
                out.push(&i.link_id);
                walk(&i.item, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.item, &mut out);
        out
    }

    pub fn find(&self, link_id: &str) -> Option<&QuestionnaireItem> {
        fn walk<'a>(items: &'a [QuestionnaireItem], id: &str) -> Option<&'a QuestionnaireItem> {
            items.iter().find_map(|i| if i.link_id == id { Some(i) } else { walk(&i.item, id) })
        }
        walk(&self.item, link_id)
    }
}

/// FHIR Quantity; `value` is written as an integer when integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FhirQuantity {
    pub value: serde_json::Number,
    pub unit: String,
    pub system: String,
    pub code: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Answer {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_boolean: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_string: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_coding: Option<Coding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_quantity: Option<FhirQuantity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResponseItem {
    pub link_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answer: Vec<Answer>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub item: Vec<ResponseItem>,
}

impl ResponseItem {
    pub fn child(&self, link_id: &str) -> Option<&ResponseItem> {
        self.item.iter().find(|i| i.link_id == link_id)
    }

    pub fn extension(&self, url: &str) -> Option<&Extension> {
        find_ext(&self.extension, url)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct QuestionnaireResponse {
    pub resource_type: String,
    pub questionnaire: String,
    pub status: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extension: Vec<Extension>,
    #[serde(default)]
    pub item: Vec<ResponseItem>,
}

impl QuestionnaireResponse {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("response serializes");
        s.push('\n');
        s
    }

    /// Every group with `link_id`, first instance first.
    pub fn groups<'a>(&'a self, link_id: &'a str) -> impl Iterator<Item = &'a ResponseItem> + 'a {
        self.item.iter().filter(move |i| i.link_id == link_id)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum FhirError {
    #[error("malformed resource: {0}")]
    Malformed(String),
    #[error("questionnaire has no items")]
    EmptyQuestionnaire,
    #[error("unknown linkId {0:?}")]
    UnknownLinkId(String),
    #[error("questionnaire targets {questionnaire} but schema is {schema}")]
    SchemaMismatch { questionnaire: SchemaRef, schema: SchemaRef },
    #[error("invalid template: {0}")]
    InvalidTemplate(String),
}
