//! Annotation-tool configuration generated from a fact schema.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::Layer;
use crate::schema::{FactSchema, UIMA_NAMESPACE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Characters,
    Tokens,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTag {
    pub name: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationLayer {
    pub layer: Layer,
    pub name: String,
    pub granularity: Granularity,
    pub feature: String,
    pub tags: Vec<LayerTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationConfiguration {
    pub tool_id: String,
    pub schema_id: String,
    pub schema_version: String,
    pub layers: Vec<AnnotationLayer>,
}

/// Builds the Fact / Anchor / Modifier layer definitions for `schema`.
pub fn generate_annotation_config(schema: &FactSchema) -> AnnotationConfiguration {
    let tags = |items: Vec<(&str, &str)>| -> Vec<LayerTag> {
        items.into_iter().map(|(n, d)| LayerTag { name: n.to_string(), description: d.to_string() }).collect()
    };
    let layer = |layer: Layer, local: &str, granularity, feature: &str, t| AnnotationLayer {
        layer,
        name: format!("{UIMA_NAMESPACE}.{local}"),
        granularity,
        feature: feature.to_string(),
        tags: t,
    };
    AnnotationConfiguration {
        tool_id: "inception".into(),
        schema_id: schema.schema_id.clone(),
        schema_version: schema.version.clone(),
        layers: vec![
            layer(
                Layer::Fact,
                "Fact",
                Granularity::Characters,
                "factId",
                tags(schema.facts.iter().map(|f| (f.id.as_str(), f.label.as_str())).collect()),
            ),
            layer(
                Layer::Anchor,
                "Anchor",
                Granularity::Tokens,
                "anchorId",
                tags(schema.facts.iter().map(|f| (f.anchor.id.as_str(), f.anchor.label.as_str())).collect()),
            ),
            layer(
                Layer::Modifier,
                "Modifier",
                Granularity::Tokens,
                "modifierId",
                tags(schema.modifiers.iter().map(|m| (m.id.as_str(), m.label.as_str())).collect()),
            ),
        ],
    }
}

impl AnnotationConfiguration {
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn layer(&self, layer: Layer) -> Option<&AnnotationLayer> {
        self.layers.iter().find(|l| l.layer == layer)
    }

    /// Reference adapter: the layer list in the shape of an INCEpTION layer
    /// export (span layers with a string feature bound to a closed tagset).
    pub fn to_inception_layers(&self) -> Value {
        let layers: Vec<Value> = self
            .layers
            .iter()
            .map(|l| {
                let short = l.name.rsplit('.').next().unwrap_or(&l.name);
                json!({
                    "name": l.name,
                    "uiName": short,
                    "description": format!("{short} layer of fact schema {} {}", self.schema_id, self.schema_version),
                    "type": "span",
                    "enabled": true,
                    "readonly": false,
                    "crossSentence": l.layer == Layer::Fact,
                    "anchoringMode": match l.granularity {
                        Granularity::Characters => "characters",
                        Granularity::Tokens => "tokens",
                    },
                    "overlapMode": "any-overlap",
                    "validationMode": "always",
                    "features": [{
                        "name": l.feature,
                        "uiName": l.feature,
                        "type": "uima.cas.String",
                        "required": true,
                        "tagset": {
                            "name": format!("{}-{short}", self.schema_id),
                            "description": format!("{short} ids of {} {}", self.schema_id, self.schema_version),
                            "createTag": false,
                            "tags": l.tags.iter().map(|t| json!({"tag_name": t.name, "tag_description": t.description})).collect::<Vec<_>>(),
                        }
                    }]
                })
            })
            .collect();
        Value::Array(layers)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::*;

    fn sizes(c: &AnnotationConfiguration) -> Vec<usize> {
        c.layers.iter().map(|l| l.tags.len()).collect()
    }

    #[test]
    fn case_study_layer_sizes() {
        let schema = mammography();
        let c = generate_annotation_config(&schema);
        assert_eq!(sizes(&c), vec![24, 24, 66]);
        let fact_tags: Vec<&str> = c.layer(Layer::Fact).unwrap().tags.iter().map(|t| t.name.as_str()).collect();
        let fact_ids: Vec<&str> = schema.facts.iter().map(|f| f.id.as_str()).collect();
        assert_eq!(fact_tags, fact_ids);
    }

    #[test]
    fn minimal_layer_sizes() {
        assert_eq!(sizes(&generate_annotation_config(&minimal())), vec![1, 1, 0]);
    }

    #[test]
    fn deterministic_bytes() {
        let s = table1();
        assert_eq!(generate_annotation_config(&s).to_canonical_json(), generate_annotation_config(&s).to_canonical_json());
        let inc = generate_annotation_config(&s).to_inception_layers();
        assert_eq!(inc.as_array().unwrap().len(), 3);
        assert_eq!(inc[2]["features"][0]["tagset"]["tags"].as_array().unwrap().len(), 3);
    }
}
