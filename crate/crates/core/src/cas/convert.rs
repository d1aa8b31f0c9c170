//! Conversion of annotation-tool XMI exports into RadEx CAS documents.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::xmi::{initial_sofa, read_xmi, XmiElement};
use super::{CasError, FactAnnotation, Layer, ModifierAnnotation, RadExCasDocument};
use crate::schema::FactSchema;
use crate::text::{SpanOffset, Utf16Offsets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OffsetEncoding {
    #[default]
    Utf16,
    Codepoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalTypeMapping {
    pub external_type: String,
    /// String feature that carries the schema id of the annotation.
    pub feature: String,
    pub layer: Layer,
}

/// How the types of one annotation tool's export map onto the RadEx layers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCasMapping {
    pub types: Vec<ExternalTypeMapping>,
    #[serde(default)]
    pub offset_encoding: OffsetEncoding,
    /// Types to skip: exact names or `prefix.*` patterns.
    #[serde(default)]
    pub ignore: Vec<String>,
}

impl Default for ExternalCasMapping {
    /// Custom span layers as created in INCEpTION from the generated
    /// annotation configuration.
    fn default() -> Self {
        let t = |name: &str, feature: &str, layer| ExternalTypeMapping {
            external_type: format!("webanno.custom.{name}"),
            feature: feature.to_string(),
            layer,
        };
        ExternalCasMapping {
            types: vec![
                t("Fact", "factId", Layer::Fact),
                t("Anchor", "anchorId", Layer::Anchor),
                t("Modifier", "modifierId", Layer::Modifier),
            ],
            offset_encoding: OffsetEncoding::Utf16,
            ignore: vec!["uima.*".into(), "de.tudarmstadt.ukp.dkpro.core.*".into()],
        }
    }
}

impl ExternalCasMapping {
    pub fn from_json(bytes: &[u8]) -> Result<Self, CasError> {
        let m: ExternalCasMapping =
            serde_json::from_slice(bytes).map_err(|e| CasError::InvalidMapping(e.to_string()))?;
        m.check()?;
        Ok(m)
    }

    /// Every layer needs exactly one source type, and a type maps to one layer.
    pub fn check(&self) -> Result<(), CasError> {
        for layer in Layer::ALL {
            let n = self.types.iter().filter(|t| t.layer == layer).count();
            if n != 1 {
                return Err(CasError::InvalidMapping(format!("layer {layer} has {n} source types, expected 1")));
            }
        }
        let names: BTreeSet<&str> = self.types.iter().map(|t| t.external_type.as_str()).collect();
        if names.len() != self.types.len() {
            return Err(CasError::InvalidMapping("an external type is mapped to more than one layer".into()));
        }
        Ok(())
    }

    fn is_ignored(&self, type_name: &str) -> bool {
        self.ignore.iter().any(|pat| match pat.strip_suffix('*') {
            Some(prefix) => type_name.starts_with(prefix),
            None => pat == type_name,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    EmptySpan,
    NoEnclosingFact,
    NoAnchor,
    MultipleAnchors,
    MissingLabel,
    UnknownLabel,
    AnchorMismatch,
    ModifierNotAllowed,
}

/// One offending entity, reported with its code-point span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityIssue {
    pub layer: Layer,
    pub label: Option<String>,
    pub span: SpanOffset,
    pub kind: IssueKind,
}

impl std::fmt::Display for EntityIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {} {}: {:?}", self.layer, self.label.as_deref().unwrap_or("<unlabelled>"), self.span, self.kind)
    }
}

struct Entity {
    label: Option<String>,
    span: SpanOffset,
}

fn to_codepoints(
    e: &XmiElement,
    encoding: OffsetEncoding,
    u16: &Utf16Offsets,
    doc_len: usize,
) -> Result<(usize, usize), CasError> {
    let (b, end) = e.offsets()?;
    let oob = || {
        CasError::OffsetOutOfBounds(format!("{} ({b},{end}) in a text of {doc_len} code points", e.type_name))
    };
    match encoding {
        OffsetEncoding::Utf16 => {
            let b2 = u16.to_codepoint(b).ok_or_else(oob)?;
            let e2 = u16.to_codepoint(end).ok_or_else(oob)?;
            Ok((b2, e2))
        }
        OffsetEncoding::Codepoint => {
            if b > doc_len || end > doc_len {
                return Err(oob());
            }
            Ok((b, end))
        }
    }
}

/// Index of the smallest fact containing `span`; ties go to the earlier fact.
fn enclosing_fact(facts: &[Entity], span: SpanOffset) -> Option<usize> {
    facts
        .iter()
        .enumerate()
        .filter(|(_, f)| f.span.contains(&span))
        .min_by_key(|(i, f)| (f.span.len(), *i))
        .map(|(i, _)| i)
}

/// Converts a tool export to a RadEx CAS document with the given id.
///
/// Structural problems (orphans, facts without exactly one anchor, empty
/// spans) are collected and returned together as [`CasError::OrphanEntity`];
/// label problems follow as [`CasError::InvalidLabels`]. No partial document
/// is produced.
pub fn convert_external_cas(
    bytes: &[u8],
    mapping: &ExternalCasMapping,
    schema: &FactSchema,
    doc_id: &str,
) -> Result<RadExCasDocument, CasError> {
    mapping.check()?;
    let elements = read_xmi(bytes)?;
    let (sofa_id, text) = initial_sofa(&elements)?;
    let u16 = Utf16Offsets::new(&text);
    let doc_len = u16.codepoint_len();

    let mut language = None;
    let mut unmapped = BTreeSet::new();
    let mut by_layer: [Vec<Entity>; 3] = Default::default();
    let mut issues = Vec::new();
    for e in &elements {
        let t = e.type_name.as_str();
        if t == "uima.tcas.DocumentAnnotation" {
            language = e.attr("language").filter(|l| !l.is_empty() && *l != "x-unspecified").map(str::to_string);
            continue;
        }
        if t.starts_with("xmi.") || matches!(t, "uima.cas.NULL" | "uima.cas.Sofa" | "uima.cas.View") {
            continue;
        }
        let Some(m) = mapping.types.iter().find(|m| m.external_type == t) else {
            if !mapping.is_ignored(t) {
                unmapped.insert(t.to_string());
            }
            continue;
        };
        if e.attr("sofa").is_some_and(|s| s != sofa_id) {
            continue;
        }
        let (b, end) = to_codepoints(e, mapping.offset_encoding, &u16, doc_len)?;
        let label = e.attr(&m.feature).map(str::trim).filter(|s| !s.is_empty()).map(str::to_string);
        if b >= end {
            issues.push(EntityIssue { layer: m.layer, label, span: SpanOffset::new(b, end), kind: IssueKind::EmptySpan });
            continue;
        }
        let idx = Layer::ALL.iter().position(|l| *l == m.layer).expect("layer");
        by_layer[idx].push(Entity { label, span: SpanOffset::new(b, end) });
    }
    if !unmapped.is_empty() {
        return Err(CasError::UnmappedType(unmapped.into_iter().collect()));
    }
    let [mut facts, anchors, modifiers] = by_layer;
    facts.sort_by_key(|f| (f.span.begin, f.span.end));

    let mut fact_anchors: Vec<Vec<&Entity>> = facts.iter().map(|_| Vec::new()).collect();
    let mut fact_modifiers: Vec<Vec<&Entity>> = facts.iter().map(|_| Vec::new()).collect();
    for (layer, entities, slots) in
        [(Layer::Anchor, &anchors, &mut fact_anchors), (Layer::Modifier, &modifiers, &mut fact_modifiers)]
    {
        for e in entities {
            match enclosing_fact(&facts, e.span) {
                Some(i) => slots[i].push(e),
                None => issues.push(EntityIssue {
                    layer,
                    label: e.label.clone(),
                    span: e.span,
                    kind: IssueKind::NoEnclosingFact,
                }),
            }
        }
    }
    for (f, a) in facts.iter().zip(&fact_anchors) {
        let kind = match a.len() {
            1 => continue,
            0 => IssueKind::NoAnchor,
            _ => IssueKind::MultipleAnchors,
        };
        issues.push(EntityIssue { layer: Layer::Fact, label: f.label.clone(), span: f.span, kind });
    }
    if !issues.is_empty() {
        issues.sort_by_key(|i| (i.span, i.layer));
        return Err(CasError::OrphanEntity(issues));
    }

    let mut annotations = Vec::with_capacity(facts.len());
    for ((f, anchors), mods) in facts.iter().zip(fact_anchors).zip(fact_modifiers) {
        let fact_issue = |kind| EntityIssue { layer: Layer::Fact, label: f.label.clone(), span: f.span, kind };
        let Some(fact_id) = f.label.as_deref() else {
            issues.push(fact_issue(IssueKind::MissingLabel));
            continue;
        };
        let Some(def) = schema.fact(fact_id) else {
            issues.push(fact_issue(IssueKind::UnknownLabel));
            continue;
        };
        let anchor = anchors[0];
        if anchor.label.as_deref().is_some_and(|l| l != def.anchor.id) {
            issues.push(EntityIssue {
                layer: Layer::Anchor,
                label: anchor.label.clone(),
                span: anchor.span,
                kind: IssueKind::AnchorMismatch,
            });
        }
        let mut modifiers = Vec::with_capacity(mods.len());
        for m in mods {
            let kind = match m.label.as_deref() {
                None => IssueKind::MissingLabel,
                Some(l) if def.modifier_ids.iter().any(|id| id == l) => {
                    modifiers.push(ModifierAnnotation { modifier_id: l.to_string(), span: m.span });
                    continue;
                }
                Some(l) if schema.modifier(l).is_some() => IssueKind::ModifierNotAllowed,
                Some(_) => IssueKind::UnknownLabel,
            };
            issues.push(EntityIssue { layer: Layer::Modifier, label: m.label.clone(), span: m.span, kind });
        }
        modifiers.sort_by_key(|m| m.span);
        annotations.push(FactAnnotation {
            fact_id: def.id.clone(),
            span: f.span,
            anchor_id: def.anchor.id.clone(),
            anchor_span: anchor.span,
            modifiers,
        });
    }
    if !issues.is_empty() {
        issues.sort_by_key(|i| (i.span, i.layer));
        return Err(CasError::InvalidLabels(issues));
    }

    let mut doc = RadExCasDocument::new(doc_id, text, schema);
    if let Some(lang) = language {
        doc.language = lang;
    }
    doc.annotations = annotations;
    debug_assert!(doc.span_problems().is_empty());
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use crate::schema::fixtures::table1;
    use crate::xml::escape;

    /// An INCEpTION-style export: custom layers, a token layer to ignore,
    /// offsets in UTF-16 units.
    fn export(text: &str, spans: &[(&str, usize, usize, &str)]) -> String {
        let mut s = String::from(
            r#"<?xml version="1.0" encoding="UTF-8"?>
<xmi:XMI xmlns:xmi="http://www.omg.org/XMI" xmlns:cas="http:///uima/cas.ecore" xmlns:tcas="http:///uima/tcas.ecore" xmlns:custom="http:///webanno/custom.ecore" xmlns:type4="http:///de/tudarmstadt/ukp/dkpro/core/api/segmentation/type.ecore" xmi:version="2.0">
  <cas:NULL xmi:id="0"/>
"#,
        );
        s.push_str(&format!(
            "  <cas:Sofa xmi:id=\"1\" sofaNum=\"1\" sofaID=\"_InitialView\" mimeType=\"text\" sofaString=\"{}\"/>\n",
            escape(text)
        ));
        s.push_str("  <tcas:DocumentAnnotation xmi:id=\"2\" sofa=\"1\" begin=\"0\" end=\"1\" language=\"en\"/>\n");
        s.push_str("  <type4:Token xmi:id=\"3\" sofa=\"1\" begin=\"0\" end=\"2\"/>\n");
        for (i, (kind, b, e, label)) in spans.iter().enumerate() {
            let feature = match *kind {
                "Fact" => "factId",
                "Anchor" => "anchorId",
                _ => "modifierId",
            };
            s.push_str(&format!(
                "  <custom:{kind} xmi:id=\"{}\" sofa=\"1\" begin=\"{b}\" end=\"{e}\" {feature}=\"{label}\"/>\n",
                10 + i
            ));
        }
        s.push_str("  <cas:View sofa=\"1\" members=\"2 3\"/>\n</xmi:XMI>\n");
        s
    }

    fn table1_spans() -> Vec<(&'static str, usize, usize, &'static str)> {
        vec![
            ("Modifier", 45, 62, "laterality"),
            ("Fact", 0, 62, "mass_described"),
            ("Anchor", 14, 28, "mass"),
            ("Modifier", 0, 2, "negation"),
            ("Modifier", 3, 13, "dignity"),
        ]
    }

    #[test]
    fn table1_export_converts_to_identical_spans() {
        let xmi = export(TABLE1_TEXT, &table1_spans());
        let doc = convert_external_cas(xmi.as_bytes(), &ExternalCasMapping::default(), &table1(), "table1").unwrap();
        assert_eq!(doc, table1_doc());
    }

    #[test]
    fn anchor_outside_every_fact_is_orphaned() {
        let mut spans = table1_spans();
        spans[1] = ("Fact", 0, 30, "mass_described");
        spans.push(("Anchor", 45, 50, "mass"));
        let xmi = export(TABLE1_TEXT, &spans);
        match convert_external_cas(xmi.as_bytes(), &ExternalCasMapping::default(), &table1(), "t") {
            Err(CasError::OrphanEntity(issues)) => {
                assert!(issues.iter().any(|i| i.layer == Layer::Anchor
                    && i.span == SpanOffset::new(45, 50)
                    && i.kind == IssueKind::NoEnclosingFact));
                assert!(issues.iter().any(|i| i.layer == Layer::Modifier && i.span == SpanOffset::new(45, 62)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fact_without_or_with_two_anchors() {
        let xmi = export(TABLE1_TEXT, &[("Fact", 0, 62, "mass_described")]);
        let err = convert_external_cas(xmi.as_bytes(), &ExternalCasMapping::default(), &table1(), "t").unwrap_err();
        assert!(matches!(&err, CasError::OrphanEntity(v) if v[0].kind == IssueKind::NoAnchor));
        let mut spans = table1_spans();
        spans.push(("Anchor", 3, 13, "mass"));
        let xmi = export(TABLE1_TEXT, &spans);
        let err = convert_external_cas(xmi.as_bytes(), &ExternalCasMapping::default(), &table1(), "t").unwrap_err();
        assert!(matches!(&err, CasError::OrphanEntity(v) if v[0].kind == IssueKind::MultipleAnchors));
    }

    #[test]
    fn astral_prefix_shifts_offsets_by_one() {
        let text = format!("𝕏 {TABLE1_TEXT}");
        let shifted: Vec<_> = table1_spans().into_iter().map(|(k, b, e, l)| (k, b + 3, e + 3, l)).collect();
        let xmi = export(&text, &shifted);
        let doc = convert_external_cas(xmi.as_bytes(), &ExternalCasMapping::default(), &table1(), "t").unwrap();
        let a = &doc.annotations[0];
        assert_eq!(a.span, SpanOffset::new(2, 64));
        assert_eq!(a.anchor_span, SpanOffset::new(16, 30));
        assert_eq!(a.modifiers[2].span, SpanOffset::new(47, 64));
    }

    #[test]
    fn codepoint_encoded_exports() {
        let text = format!("𝕏 {TABLE1_TEXT}");
        let shifted: Vec<_> = table1_spans().into_iter().map(|(k, b, e, l)| (k, b + 2, e + 2, l)).collect();
        let xmi = export(&text, &shifted);
        let mapping = ExternalCasMapping { offset_encoding: OffsetEncoding::Codepoint, ..Default::default() };
        let doc = convert_external_cas(xmi.as_bytes(), &mapping, &table1(), "t").unwrap();
        assert_eq!(doc.annotations[0].span, SpanOffset::new(2, 64));
    }

    #[test]
    fn unmapped_types_and_bad_mappings() {
        let xmi = export(TABLE1_TEXT, &table1_spans());
        let mapping = ExternalCasMapping { ignore: vec![], ..Default::default() };
        let err = convert_external_cas(xmi.as_bytes(), &mapping, &table1(), "t").unwrap_err();
        assert!(
            matches!(&err, CasError::UnmappedType(t) if t == &["de.tudarmstadt.ukp.dkpro.core.api.segmentation.type.Token"])
        );
        let mut mapping = ExternalCasMapping::default();
        mapping.types.pop();
        assert!(matches!(
            convert_external_cas(xmi.as_bytes(), &mapping, &table1(), "t"),
            Err(CasError::InvalidMapping(_))
        ));
        let json = serde_json::to_vec(&ExternalCasMapping::default()).unwrap();
        assert_eq!(ExternalCasMapping::from_json(&json).unwrap(), ExternalCasMapping::default());
    }

    #[test]
    fn label_problems() {
        let mut spans = table1_spans();
        spans[0] = ("Modifier", 45, 62, "size");
        let xmi = export(TABLE1_TEXT, &spans);
        let err = convert_external_cas(xmi.as_bytes(), &ExternalCasMapping::default(), &table1(), "t").unwrap_err();
        assert!(matches!(&err, CasError::InvalidLabels(v) if v[0].kind == IssueKind::UnknownLabel));
        let mut spans = table1_spans();
        spans[2] = ("Anchor", 14, 28, "");
        let xmi = export(TABLE1_TEXT, &spans);
        let doc = convert_external_cas(xmi.as_bytes(), &ExternalCasMapping::default(), &table1(), "t").unwrap();
        assert_eq!(doc.annotations[0].anchor_id, "mass");
    }

    #[test]
    fn out_of_bounds_offsets() {
        let xmi = export(TABLE1_TEXT, &[("Fact", 0, 90, "mass_described")]);
        assert!(matches!(
            convert_external_cas(xmi.as_bytes(), &ExternalCasMapping::default(), &table1(), "t"),
            Err(CasError::OffsetOutOfBounds(_))
        ));
    }
}
