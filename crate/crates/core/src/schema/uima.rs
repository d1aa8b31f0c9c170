//! UIMA type-system descriptor export.
//!
//! Three span types (`Fact`, `Anchor`, `Modifier`) derive from
//! `uima.tcas.Annotation`. Their label features are typed by string subtypes
//! whose `allowedValues` enumerate the schema ids, which is how UIMA expresses
//! closed tag sets. A `DocumentInfo` feature structure carries the document id
//! and the schema pin.

use std::fmt::Write;

use super::FactSchema;
use crate::xml::escape;

pub const UIMA_NAMESPACE: &str = "org.radex.types";

struct Feature<'a> {
    name: &'a str,
    description: &'a str,
    range: String,
    element: Option<String>,
}

fn feature<'a>(name: &'a str, description: &'a str, range: impl Into<String>) -> Feature<'a> {
    Feature { name, description, range: range.into(), element: None }
}

fn write_type(out: &mut String, name: &str, description: &str, supertype: &str, features: &[Feature<'_>]) {
    let _ = writeln!(out, "    <typeDescription>");
    let _ = writeln!(out, "      <name>{}</name>", escape(name));
    let _ = writeln!(out, "      <description>{}</description>", escape(description));
    let _ = writeln!(out, "      <supertypeName>{supertype}</supertypeName>");
    if !features.is_empty() {
        let _ = writeln!(out, "      <features>");
        for f in features {
            let _ = writeln!(out, "        <featureDescription>");
            let _ = writeln!(out, "          <name>{}</name>", f.name);
            let _ = writeln!(out, "          <description>{}</description>", escape(f.description));
            let _ = writeln!(out, "          <rangeTypeName>{}</rangeTypeName>", f.range);
            if let Some(el) = &f.element {
                let _ = writeln!(out, "          <elementType>{el}</elementType>");
                let _ = writeln!(out, "          <multipleReferencesAllowed>false</multipleReferencesAllowed>");
            }
            let _ = writeln!(out, "        </featureDescription>");
        }
        let _ = writeln!(out, "      </features>");
    }
    let _ = writeln!(out, "    </typeDescription>");
}

fn write_enum<'a>(out: &mut String, name: &str, description: &str, values: impl Iterator<Item = (&'a str, &'a str)>) {
    let _ = writeln!(out, "    <typeDescription>");
    let _ = writeln!(out, "      <name>{name}</name>");
    let _ = writeln!(out, "      <description>{}</description>", escape(description));
    let _ = writeln!(out, "      <supertypeName>uima.cas.String</supertypeName>");
    let mut body = String::new();
    for (id, label) in values {
        let _ = writeln!(body, "        <value>");
        let _ = writeln!(body, "          <string>{}</string>", escape(id));
        let _ = writeln!(body, "          <description>{}</description>", escape(label));
        let _ = writeln!(body, "        </value>");
    }
    if body.is_empty() {
        let _ = writeln!(out, "      <allowedValues/>");
    } else {
        let _ = writeln!(out, "      <allowedValues>");
        out.push_str(&body);
        let _ = writeln!(out, "      </allowedValues>");
    }
    let _ = writeln!(out, "    </typeDescription>");
}

/// Renders the UIMA 2.x `typeSystemDescription` for `schema`. The output is a
/// pure function of the schema, so equal schemas give byte-equal XML.
pub fn export_uima_type_system(schema: &FactSchema) -> String {
    let ns = UIMA_NAMESPACE;
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<typeSystemDescription xmlns=\"http://uima.apache.org/resourceSpecifier\">\n");
    let _ = writeln!(out, "  <name>{}</name>", escape(&schema.schema_id));
    let _ = writeln!(
        out,
        "  <description>RadEx information model for fact schema {} ({})</description>",
        escape(&schema.schema_id),
        escape(&schema.language)
    );
    let _ = writeln!(out, "  <version>{}</version>", escape(&schema.version));
    out.push_str("  <types>\n");

    let mut fact_features = vec![
        feature("factId", "Fact schema id of this fact", format!("{ns}.FactId")),
        feature("anchor", "The anchor entity of this fact", format!("{ns}.Anchor")),
    ];
    fact_features.push(Feature {
        name: "modifiers",
        description: "Modifiers attached to this fact",
        range: "uima.cas.FSArray".into(),
        element: Some(format!("{ns}.Modifier")),
    });
    write_type(&mut out, &format!("{ns}.Fact"), "A clinical assertion spanning one contiguous text range", "uima.tcas.Annotation", &fact_features);
    write_type(
        &mut out,
        &format!("{ns}.Anchor"),
        "The central word or phrase of a fact",
        "uima.tcas.Annotation",
        &[feature("anchorId", "Fact schema id of this anchor entity", format!("{ns}.AnchorId"))],
    );
    write_type(
        &mut out,
        &format!("{ns}.Modifier"),
        "Additional information about a fact",
        "uima.tcas.Annotation",
        &[feature("modifierId", "Fact schema id of this modifier", format!("{ns}.ModifierId"))],
    );
    write_type(
        &mut out,
        &format!("{ns}.DocumentInfo"),
        "Document id and the fact schema the annotations follow",
        "uima.cas.TOP",
        &[
            feature("docId", "Document identifier", "uima.cas.String"),
            feature("schemaId", "Fact schema identifier", "uima.cas.String"),
            feature("schemaVersion", "Fact schema version", "uima.cas.String"),
        ],
    );
    write_enum(&mut out, &format!("{ns}.FactId"), "Fact ids", schema.facts.iter().map(|f| (f.id.as_str(), f.label.as_str())));
    write_enum(
        &mut out,
        &format!("{ns}.AnchorId"),
        "Anchor entity ids",
        schema.facts.iter().map(|f| (f.anchor.id.as_str(), f.anchor.label.as_str())),
    );
    write_enum(
        &mut out,
        &format!("{ns}.ModifierId"),
        "Modifier ids",
        schema.modifiers.iter().map(|m| (m.id.as_str(), m.label.as_str())),
    );
    out.push_str("  </types>\n");
    out.push_str("</typeSystemDescription>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;
    use quick_xml::events::Event;
    use quick_xml::Reader;

    /// Collects allowed values per enumerated type by walking the XML.
    fn enumerations(xml: &str) -> Vec<(String, Vec<String>)> {
        let mut reader = Reader::from_str(xml);
        let mut stack: Vec<String> = Vec::new();
        let mut out: Vec<(String, Vec<String>)> = Vec::new();
        let mut current_type = String::new();
        loop {
            match reader.read_event().unwrap() {
                Event::Start(e) => stack.push(String::from_utf8(e.name().as_ref().to_vec()).unwrap()),
                Event::Empty(e) if e.name().as_ref() == b"allowedValues" => {
                    out.push((current_type.clone(), vec![]));
                }
                Event::End(_) => {
                    stack.pop();
                }
                Event::Text(t) => {
                    let text = t.decode().unwrap().into_owned();
                    let path: Vec<&str> = stack.iter().map(String::as_str).collect();
                    match path.as_slice() {
                        [.., "typeDescription", "name"] => current_type = text,
                        [.., "allowedValues", "value", "string"] => {
                            if out.last().map(|(t, _)| t != &current_type).unwrap_or(true) {
                                out.push((current_type.clone(), vec![]));
                            }
                            out.last_mut().unwrap().1.push(text);
                        }
                        _ => {}
                    }
                }
                Event::Eof => break,
                _ => {}
            }
        }
        out
    }

    #[test]
    fn mammography_enumerations() {
        let xml = export_uima_type_system(&mammography());
        let enums = enumerations(&xml);
        let sizes: Vec<(&str, usize)> = enums.iter().map(|(t, v)| (t.as_str(), v.len())).collect();
        assert_eq!(
            sizes,
            vec![("org.radex.types.FactId", 24), ("org.radex.types.AnchorId", 24), ("org.radex.types.ModifierId", 66)]
        );
    }

    #[test]
    fn empty_modifier_pool() {
        let xml = export_uima_type_system(&minimal());
        assert!(xml.contains("<name>org.radex.types.Fact</name>"));
        assert!(xml.contains("<name>org.radex.types.Anchor</name>"));
        assert!(xml.contains("<name>org.radex.types.Modifier</name>"));
        let enums = enumerations(&xml);
        assert_eq!(enums.last().unwrap(), &("org.radex.types.ModifierId".to_string(), vec![]));
    }

    #[test]
    fn deterministic() {
        let schema = table1();
        assert_eq!(export_uima_type_system(&schema), export_uima_type_system(&schema.clone()));
    }
}
