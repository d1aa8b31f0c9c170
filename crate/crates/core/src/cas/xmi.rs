//! UIMA XMI reading and the RadEx CAS serialization.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{CasError, FactAnnotation, ModifierAnnotation, RadExCasDocument, SpanOffset};
use crate::schema::UIMA_NAMESPACE;
use crate::text::Utf16Offsets;
use crate::xml::{escape, is_xml_char};

const NS_XMI: &str = "http://www.omg.org/XMI";
const NS_CAS: &str = "http:///uima/cas.ecore";
const NS_TCAS: &str = "http:///uima/tcas.ecore";
const NS_RADEX: &str = "http:///org/radex/types.ecore";

/// One top-level feature structure of an XMI document.
#[derive(Debug, Clone)]
pub(crate) struct XmiElement {
    /// Fully qualified UIMA type name, e.g. `uima.cas.Sofa`.
    pub type_name: String,
    pub attrs: BTreeMap<String, String>,
}

impl XmiElement {
    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.get(name).map(String::as_str)
    }

    pub fn xmi_id(&self) -> Option<&str> {
        self.attr("xmi:id")
    }

    pub fn require(&self, name: &str) -> Result<&str, CasError> {
        self.attr(name)
            .ok_or_else(|| CasError::MalformedXmi(format!("{} element lacks attribute {name:?}", self.type_name)))
    }

    pub fn offsets(&self) -> Result<(usize, usize), CasError> {
        let parse = |name: &str| -> Result<usize, CasError> {
            let raw = self.require(name)?;
            raw.parse()
                .map_err(|_| CasError::MalformedXmi(format!("{} {name}={raw:?} is not an offset", self.type_name)))
        };
        Ok((parse("begin")?, parse("end")?))
    }
}

/// Maps an Ecore namespace URI (`http:///org/radex/types.ecore`) to the UIMA
/// package it encodes (`org.radex.types`).
fn package_of(uri: &str) -> Option<String> {
    let path = uri.strip_prefix("http:///")?.strip_suffix(".ecore")?;
    Some(path.replace('/', "."))
}

fn attrs_of(e: &BytesStart<'_>, reader: &Reader<&[u8]>) -> Result<BTreeMap<String, String>, CasError> {
    let mut out = BTreeMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| CasError::MalformedXmi(err.to_string()))?;
        let key = String::from_utf8(attr.key.as_ref().to_vec()).map_err(|err| CasError::MalformedXmi(err.to_string()))?;
        let value = attr
            .decode_and_unescape_value(reader.decoder())
            .map_err(|err| CasError::MalformedXmi(err.to_string()))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

/// Reads the root `xmi:XMI` element and its direct children. Nested
/// elements (multi-valued features written as children) are skipped.
pub(crate) fn read_xmi(bytes: &[u8]) -> Result<Vec<XmiElement>, CasError> {
    let mut reader = Reader::from_reader(bytes);
    let mut namespaces: HashMap<String, String> = HashMap::new();
    let mut depth = 0usize;
    let mut saw_root = false;
    let mut elements = Vec::new();
    loop {
        let event = reader.read_event().map_err(|e| CasError::MalformedXmi(e.to_string()))?;
        let (start, is_empty) = match &event {
            Event::Start(e) => (Some(e.clone()), false),
            Event::Empty(e) => (Some(e.clone()), true),
            Event::End(_) => {
                depth = depth.saturating_sub(1);
                continue;
            }
            Event::Eof => break,
            _ => continue,
        };
        let Some(start) = start else { continue };
        if depth == 0 {
            if saw_root {
                return Err(CasError::MalformedXmi("more than one root element".into()));
            }
            saw_root = true;
            let attrs = attrs_of(&start, &reader)?;
            for (k, v) in &attrs {
                if let Some(prefix) = k.strip_prefix("xmlns:") {
                    namespaces.insert(prefix.to_string(), v.clone());
                }
            }
            let qname = String::from_utf8_lossy(start.name().as_ref()).into_owned();
            let (prefix, local) = qname.split_once(':').unwrap_or(("", qname.as_str()));
            if local != "XMI" || namespaces.get(prefix).map(String::as_str) != Some(NS_XMI) {
                return Err(CasError::MalformedXmi(format!("root element {qname:?} is not xmi:XMI")));
            }
        } else if depth == 1 {
            let qname = String::from_utf8_lossy(start.name().as_ref()).into_owned();
            let (prefix, local) = qname
                .split_once(':')
                .ok_or_else(|| CasError::MalformedXmi(format!("element {qname:?} has no namespace prefix")))?;
            let uri = namespaces
                .get(prefix)
                .ok_or_else(|| CasError::MalformedXmi(format!("undeclared namespace prefix {prefix:?}")))?;
            let type_name = if uri == NS_XMI {
                format!("xmi.{local}")
            } else {
                let package = package_of(uri)
                    .ok_or_else(|| CasError::MalformedXmi(format!("namespace {uri:?} is not an Ecore package URI")))?;
                format!("{package}.{local}")
            };
            elements.push(XmiElement { type_name, attrs: attrs_of(&start, &reader)? });
        }
        if !is_empty {
            depth += 1;
        }
    }
    if !saw_root {
        return Err(CasError::MalformedXmi("no root element".into()));
    }
    Ok(elements)
}

/// The initial-view sofa: its xmi:id and text.
pub(crate) fn initial_sofa(elements: &[XmiElement]) -> Result<(String, String), CasError> {
    let sofas: Vec<&XmiElement> = elements.iter().filter(|e| e.type_name == "uima.cas.Sofa").collect();
    let sofa = match sofas.as_slice() {
        [] => return Err(CasError::MalformedXmi("no sofa".into())),
        [only] => *only,
        many => many
            .iter()
            .find(|s| s.attr("sofaID") == Some("_InitialView"))
            .copied()
            .ok_or_else(|| CasError::MalformedXmi("no _InitialView sofa".into()))?,
    };
    let id = sofa.xmi_id().ok_or_else(|| CasError::MalformedXmi("sofa without xmi:id".into()))?;
    Ok((id.to_string(), sofa.attr("sofaString").unwrap_or_default().to_string()))
}

/// Serializes a document into RadEx CAS XMI. Offsets are written in UTF-16
/// code units as UIMA expects.
pub fn serialize_radex_cas(doc: &RadExCasDocument) -> Result<Vec<u8>, CasError> {
    let problems = doc.span_problems();
    if !problems.is_empty() {
        return Err(CasError::InvalidDocument(problems));
    }
    if let Some(pos) = doc.text.chars().position(|c| !is_xml_char(c)) {
        return Err(CasError::UnrepresentableText(pos));
    }
    let u16 = Utf16Offsets::new(&doc.text);
    let off = |s: SpanOffset| u16.span_to_utf16(s).expect("span checked against text");

    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<xmi:XMI xmlns:xmi=\"{NS_XMI}\" xmlns:cas=\"{NS_CAS}\" xmlns:tcas=\"{NS_TCAS}\" xmlns:types=\"{NS_RADEX}\" xmi:version=\"2.0\">"
    );
    out.push_str("  <cas:NULL xmi:id=\"0\"/>\n");
    let _ = writeln!(
        out,
        "  <cas:Sofa xmi:id=\"1\" sofaNum=\"1\" sofaID=\"_InitialView\" mimeType=\"text/plain\" sofaString=\"{}\"/>",
        escape(&doc.text)
    );
    let _ = writeln!(
        out,
        "  <tcas:DocumentAnnotation xmi:id=\"2\" sofa=\"1\" begin=\"0\" end=\"{}\" language=\"{}\"/>",
        u16.utf16_len(),
        escape(&doc.language)
    );
    let _ = writeln!(
        out,
        "  <types:DocumentInfo xmi:id=\"3\" docId=\"{}\" schemaId=\"{}\" schemaVersion=\"{}\"/>",
        escape(&doc.doc_id),
        escape(&doc.schema_id),
        escape(&doc.schema_version)
    );
    let mut members = vec![2usize, 3];
    let mut next = 4usize;
    for a in &doc.annotations {
        let fact_id = next;
        let anchor_id = next + 1;
        let modifier_ids: Vec<usize> = (0..a.modifiers.len()).map(|i| next + 2 + i).collect();
        next += 2 + a.modifiers.len();
        let (b, e) = off(a.span);
        let refs = modifier_ids.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
        let mods_attr = if refs.is_empty() { String::new() } else { format!(" modifiers=\"{refs}\"") };
        let _ = writeln!(
            out,
            "  <types:Fact xmi:id=\"{fact_id}\" sofa=\"1\" begin=\"{b}\" end=\"{e}\" factId=\"{}\" anchor=\"{anchor_id}\"{mods_attr}/>",
            escape(&a.fact_id)
        );
        let (b, e) = off(a.anchor_span);
        let _ = writeln!(
            out,
            "  <types:Anchor xmi:id=\"{anchor_id}\" sofa=\"1\" begin=\"{b}\" end=\"{e}\" anchorId=\"{}\"/>",
            escape(&a.anchor_id)
        );
        for (m, id) in a.modifiers.iter().zip(&modifier_ids) {
            let (b, e) = off(m.span);
            let _ = writeln!(
                out,
                "  <types:Modifier xmi:id=\"{id}\" sofa=\"1\" begin=\"{b}\" end=\"{e}\" modifierId=\"{}\"/>",
                escape(&m.modifier_id)
            );
        }
        members.push(fact_id);
        members.push(anchor_id);
        members.extend(&modifier_ids);
    }
    let members = members.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    let _ = writeln!(out, "  <cas:View sofa=\"1\" members=\"{members}\"/>");
    out.push_str("</xmi:XMI>\n");
    Ok(out.into_bytes())
}

/// Parses RadEx CAS XMI back into a document, converting UTF-16 offsets to
/// code points.
pub fn parse_radex_cas(bytes: &[u8]) -> Result<RadExCasDocument, CasError> {
    let elements = read_xmi(bytes)?;
    let (_, text) = initial_sofa(&elements)?;
    let u16 = Utf16Offsets::new(&text);
    let fact_type = format!("{UIMA_NAMESPACE}.Fact");
    let anchor_type = format!("{UIMA_NAMESPACE}.Anchor");
    let modifier_type = format!("{UIMA_NAMESPACE}.Modifier");
    let info_type = format!("{UIMA_NAMESPACE}.DocumentInfo");

    let mut by_id: HashMap<&str, &XmiElement> = HashMap::new();
    let mut facts = Vec::new();
    let mut info = None;
    let mut language = None;
    for e in &elements {
        match e.type_name.as_str() {
            "uima.cas.NULL" | "uima.cas.Sofa" | "uima.cas.View" => continue,
            "uima.tcas.DocumentAnnotation" => language = e.attr("language").map(str::to_string),
            t if t == fact_type => facts.push(e),
            t if t == info_type => info = Some(e),
            t if t == anchor_type || t == modifier_type => {}
            other => return Err(CasError::UnknownType(other.to_string())),
        }
        if let Some(id) = e.xmi_id() {
            if by_id.insert(id, e).is_some() {
                return Err(CasError::MalformedXmi(format!("duplicate xmi:id {id}")));
            }
        }
    }
    let info = info.ok_or_else(|| CasError::MalformedXmi("missing DocumentInfo".into()))?;

    let span_of = |e: &XmiElement| -> Result<SpanOffset, CasError> {
        let (b, end) = e.offsets()?;
        u16.span_from_utf16(b, end).ok_or_else(|| {
            CasError::OffsetOutOfBounds(format!(
                "{} ({b},{end}) does not fall on code point boundaries of a {}-unit text",
                e.type_name,
                u16.utf16_len()
            ))
        })
    };
    let resolve = |id: &str, expected: &str| -> Result<&XmiElement, CasError> {
        let e = by_id.get(id).ok_or_else(|| CasError::MalformedXmi(format!("dangling reference {id}")))?;
        if e.type_name != expected {
            return Err(CasError::MalformedXmi(format!("reference {id} is a {}, expected {expected}", e.type_name)));
        }
        Ok(e)
    };

    let mut referenced = HashSet::new();
    let mut annotations = Vec::with_capacity(facts.len());
    for f in facts {
        let anchor_ref = f.require("anchor")?;
        let anchor = resolve(anchor_ref, &anchor_type)?;
        referenced.insert(anchor_ref);
        let mut modifiers = Vec::new();
        for mref in f.attr("modifiers").unwrap_or_default().split_whitespace() {
            let m = resolve(mref, &modifier_type)?;
            referenced.insert(mref);
            modifiers.push(ModifierAnnotation { modifier_id: m.require("modifierId")?.to_string(), span: span_of(m)? });
        }
        annotations.push(FactAnnotation {
            fact_id: f.require("factId")?.to_string(),
            span: span_of(f)?,
            anchor_id: anchor.require("anchorId")?.to_string(),
            anchor_span: span_of(anchor)?,
            modifiers,
        });
    }
    for e in &elements {
        if (e.type_name == anchor_type || e.type_name == modifier_type)
            && !e.xmi_id().is_some_and(|id| referenced.contains(id))
        {
            return Err(CasError::MalformedXmi(format!("{} {:?} is not attached to a fact", e.type_name, e.xmi_id())));
        }
    }

    let doc = RadExCasDocument {
        doc_id: info.require("docId")?.to_string(),
        text,
        language: language.unwrap_or_default(),
        schema_id: info.require("schemaId")?.to_string(),
        schema_version: info.require("schemaVersion")?.to_string(),
        annotations,
    };
    let problems = doc.span_problems();
    if !problems.is_empty() {
        return Err(CasError::MalformedXmi(problems.join("; ")));
    }
    Ok(doc)
}
