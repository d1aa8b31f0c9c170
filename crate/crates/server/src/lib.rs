//! HTTP integration server.
//!
//! A client (typically the RIS) posts a report text plus a report template in
//! the form of a FHIR Questionnaire; the server extracts facts with the
//! configured extractor, fills the template and answers with a FHIR
//! QuestionnaireResponse. Schema and template CRUD endpoints back the schema
//! editor.

mod api;
mod config;
mod error;
mod store;

use std::collections::BTreeMap;
use std::sync::Arc;

use radex_core::extract::RemoteExtractor;

pub use api::{router, FillRequest, PreviewRequest};
pub use config::{RemoteConfig, ServerConfig, BASELINE};
pub use error::{ApiError, ServerError};
pub use store::{valid_id, SchemaEntry, Snapshot, Store};

/// Shared, cheaply clonable server state.
#[derive(Clone)]
pub struct AppState {
    pub(crate) store: Arc<Store>,
    pub(crate) remotes: Arc<BTreeMap<String, RemoteConfig>>,
    pub(crate) default_extractor: Arc<str>,
    pub(crate) config: Arc<ServerConfig>,
}

impl AppState {
    pub fn new(config: ServerConfig) -> Result<Self, ServerError> {
        config.check()?;
        let store = Store::open(&config.store)?;
        let remotes = config.remotes.iter().map(|r| (r.name.clone(), r.clone())).collect();
        Ok(AppState {
            store: Arc::new(store),
            remotes: Arc::new(remotes),
            default_extractor: config.default_extractor.as_str().into(),
            config: Arc::new(config),
        })
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub(crate) fn remote(&self, name: &str, schema: &radex_core::FactSchema) -> Option<Result<RemoteExtractor, ApiError>> {
        let cfg = self.remotes.get(name)?;
        Some(RemoteExtractor::new(cfg.descriptor(), schema.clone(), self.config.remote_timeout()).map_err(|e| {
            ApiError::unprocessable("extractor_schema_mismatch", e.to_string())
                .with_detail(serde_json::json!({ "extractor": name, "endpoint": cfg.endpoint }))
        }))
    }
}

/// Binds and serves until the process is stopped.
pub async fn serve(config: ServerConfig) -> Result<(), ServerError> {
    let bind = config.bind;
    let app = router(AppState::new(config)?);
    let listener = tokio::net::TcpListener::bind(bind).await?;
    axum::serve(listener, app).await?;
    Ok(())
}
