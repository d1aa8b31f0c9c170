use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use radex_core::extract::{ExtractedFact, ExtractorDescriptor};
use radex_core::fhir::{filled_to_response, questionnaire_to_template, FhirError, Questionnaire};
use radex_core::fill::{fill_template, FillError, FilledTemplate};
use radex_core::schema::{derive_report_template, validate_schema, FactSchema, ReportTemplate};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::store::{valid_id, SchemaEntry};
use crate::{ApiError, AppState, BASELINE};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FillRequest {
    pub questionnaire: Value,
    pub text: String,
    #[serde(default)]
    pub extractor: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreviewRequest {
    pub schema_id: String,
    pub fact_ids: Vec<String>,
    pub text: String,
    /// Optional per-fact modifier subsets.
    #[serde(default)]
    pub modifier_ids: Option<BTreeMap<String, Vec<String>>>,
    #[serde(default)]
    pub extractor: Option<String>,
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/fill", post(fill_handler))
        .route("/v1/preview", post(preview))
        .route("/v1/schemas", get(list_schemas))
        .route("/v1/schemas/{id}", get(get_schema).put(put_schema))
        .route("/v1/templates", get(list_templates))
        .route("/v1/templates/{id}", get(get_template).put(put_template))
        .route("/v1/extractors", get(list_extractors))
        .fallback(|| async { ApiError::not_found("not_found", "no such route") })
        .with_state(state)
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn canonical(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn check_id(id: &str) -> Result<(), ApiError> {
    if valid_id(id) {
        Ok(())
    } else {
        Err(ApiError::bad_request(format!("invalid id {id:?}")))
    }
}

fn schema_entry(state: &AppState, schema_id: &str) -> Result<Arc<SchemaEntry>, ApiError> {
    state
        .store
        .snapshot()
        .schemas
        .get(schema_id)
        .cloned()
        .ok_or_else(|| ApiError::unprocessable("unknown_schema", format!("no schema {schema_id:?} in the store")))
}

struct Extraction {
    facts: Vec<ExtractedFact>,
    name: String,
    remote: bool,
}

async fn extract(
    state: &AppState,
    requested: Option<String>,
    entry: Arc<SchemaEntry>,
    text: String,
) -> Result<Extraction, ApiError> {
    let name = requested.unwrap_or_else(|| state.default_extractor.to_string());
    if name == BASELINE {
        let facts = tokio::task::spawn_blocking(move || entry.baseline.extract(&text))
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
        return Ok(Extraction { facts, name, remote: false });
    }
    let remote = state
        .remote(&name, &entry.schema)
        .ok_or_else(|| ApiError::not_found("unknown_extractor", format!("no extractor named {name:?}")))??;
    let facts = tokio::task::spawn_blocking(move || remote.extract(&text))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Extraction { facts, name, remote: true })
}

fn fill_report(
    template: &ReportTemplate,
    schema: &FactSchema,
    x: &Extraction,
    text: &str,
) -> Result<FilledTemplate, ApiError> {
    fill_template(template, schema, &x.facts, text, &x.name).map_err(|e| match e {
        FillError::InvalidSpans(issues) if x.remote => {
            ApiError::new(StatusCode::BAD_GATEWAY, "invalid_spans", "extractor returned invalid spans")
                .with_detail(json!({ "extractor": x.name, "issues": issues }))
        }
        FillError::InvalidSpans(issues) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", "baseline produced invalid spans")
            .with_detail(json!({ "issues": issues })),
        other => ApiError::unprocessable("invalid_template", other.to_string()),
    })
}

async fn fill_handler(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: FillRequest = parse(&body)?;
    let q: Questionnaire =
        serde_json::from_value(req.questionnaire).map_err(|e| ApiError::from(FhirError::Malformed(e.to_string())))?;
    if q.resource_type != "Questionnaire" {
        return Err(FhirError::Malformed(format!("resourceType is {:?}", q.resource_type)).into());
    }
    if q.item.is_empty() {
        return Err(FhirError::EmptyQuestionnaire.into());
    }
    if req.text.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_text", "report text is empty"));
    }
    let entry = schema_entry(&state, &q.schema_ref()?.schema_id)?;
    let template = questionnaire_to_template(&q, &entry.schema)?;
    let x = extract(&state, req.extractor, Arc::clone(&entry), req.text.clone()).await?;
    let filled = fill_report(&template, &entry.schema, &x, &req.text)?;
    Ok(canonical(filled_to_response(&filled, &q).to_json()))
}

async fn preview(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let req: PreviewRequest = parse(&body)?;
    let entry = schema_entry(&state, &req.schema_id)?;
    let template = derive_report_template(&entry.schema, "preview", &req.fact_ids, req.modifier_ids.as_ref())
        .map_err(|e| ApiError::unprocessable("invalid_template", e.to_string()))?;
    let x = extract(&state, req.extractor, Arc::clone(&entry), req.text.clone()).await?;
    let filled = fill_report(&template, &entry.schema, &x, &req.text)?;
    Ok(canonical(filled.to_json()))
}

async fn list_schemas(State(state): State<AppState>) -> Json<Value> {
    let snap = state.store.snapshot();
    let list: Vec<Value> = snap
        .schemas
        .values()
        .map(|e| {
            let c = e.schema.counts();
            json!({
                "schema_id": e.schema.schema_id,
                "version": e.schema.version,
                "language": e.schema.language,
                "facts": c.facts,
                "anchors": c.anchors,
                "modifiers": c.modifiers,
            })
        })
        .collect();
    Json(Value::Array(list))
}

async fn get_schema(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = state.store.snapshot();
    let e = snap.schemas.get(&id).ok_or_else(|| ApiError::not_found("unknown_schema", format!("no schema {id:?}")))?;
    Ok(canonical(e.schema.to_canonical_json()))
}

async fn put_schema(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    check_id(&id)?;
    let schema: FactSchema = parse(&body)?;
    if schema.schema_id != id {
        return Err(ApiError::bad_request(format!("body schema_id {:?} does not match path {id:?}", schema.schema_id)));
    }
    let violations = validate_schema(&schema);
    if !violations.is_empty() {
        return Err(ApiError::unprocessable("schema_invalid", format!("{} violation(s)", violations.len()))
            .with_detail(json!({ "violations": violations })));
    }
    let c = schema.counts();
    let out = json!({ "schema_id": id, "version": schema.version, "facts": c.facts, "anchors": c.anchors, "modifiers": c.modifiers });
    let store = Arc::clone(&state.store);
    tokio::task::spawn_blocking(move || store.put_schema(schema))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(out).into_response())
}

async fn list_templates(State(state): State<AppState>) -> Json<Value> {
    let snap = state.store.snapshot();
    let list: Vec<Value> = snap
        .templates
        .values()
        .map(|t| {
            json!({
                "template_id": t.template_id,
                "schema_id": t.schema_id,
                "schema_version": t.schema_version,
                "facts": t.entries.len(),
            })
        })
        .collect();
    Json(Value::Array(list))
}

async fn get_template(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = state.store.snapshot();
    let t = snap.templates.get(&id).ok_or_else(|| ApiError::not_found("unknown_template", format!("no template {id:?}")))?;
    Ok(canonical(t.to_canonical_json()))
}

async fn put_template(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    check_id(&id)?;
    let template: ReportTemplate = parse(&body)?;
    if template.template_id != id {
        return Err(ApiError::bad_request(format!(
            "body template_id {:?} does not match path {id:?}",
            template.template_id
        )));
    }
    let entry = schema_entry(&state, &template.schema_id)?;
    template.check_against(&entry.schema).map_err(|e| ApiError::unprocessable("invalid_template", e.to_string()))?;
    let out = json!({ "template_id": id, "schema_id": template.schema_id, "schema_version": template.schema_version });
    let store = Arc::clone(&state.store);
    tokio::task::spawn_blocking(move || store.put_template(template))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    Ok(Json(out).into_response())
}

#[derive(Serialize)]
struct ExtractorListing {
    #[serde(flatten)]
    descriptor: ExtractorDescriptor,
    default: bool,
}

/// One baseline entry per stored schema plus every configured remote.
async fn list_extractors(State(state): State<AppState>) -> Json<Vec<ExtractorListing>> {
    let snap = state.store.snapshot();
    let default = state.default_extractor.as_ref();
    let mut out: Vec<ExtractorListing> = snap
        .schemas
        .values()
        .map(|e| ExtractorListing {
            descriptor: ExtractorDescriptor::baseline(BASELINE, e.schema.schema_ref()),
            default: default == BASELINE,
        })
        .collect();
    out.extend(
        state
            .remotes
            .values()
            .map(|r| ExtractorListing { descriptor: r.descriptor(), default: default == r.name }),
    );
    Json(out)
}
