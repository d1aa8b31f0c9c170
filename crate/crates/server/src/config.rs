use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use radex_core::extract::{ExtractorDescriptor, DEFAULT_TIMEOUT};
use radex_core::schema::SchemaRef;
use serde::{Deserialize, Serialize};

use crate::ServerError;

/// Name under which the in-process baseline extractor is addressed.
pub const BASELINE: &str = "baseline";

/// A remote inference endpoint serving one schema version.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub name: String,
    pub endpoint: String,
    pub schema_id: String,
    pub schema_version: String,
}

impl RemoteConfig {
    pub fn descriptor(&self) -> ExtractorDescriptor {
        ExtractorDescriptor::remote(
            &self.name,
            &self.endpoint,
            SchemaRef { schema_id: self.schema_id.clone(), schema_version: self.schema_version.clone() },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerConfig {
    #[serde(default = "default_bind")]
    pub bind: SocketAddr,
    /// Directory holding `schemas/`, `templates/` and optional `phrases/`.
    pub store: PathBuf,
    #[serde(default = "default_extractor")]
    pub default_extractor: String,
    #[serde(default)]
    pub remotes: Vec<RemoteConfig>,
    #[serde(default = "default_timeout_secs")]
    pub remote_timeout_secs: u64,
}

fn default_bind() -> SocketAddr {
    SocketAddr::from(([127, 0, 0, 1], 8080))
}

fn default_extractor() -> String {
    BASELINE.into()
}

fn default_timeout_secs() -> u64 {
    DEFAULT_TIMEOUT.as_secs()
}

impl ServerConfig {
    pub fn new(store: impl Into<PathBuf>) -> Self {
        ServerConfig {
            bind: default_bind(),
            store: store.into(),
            default_extractor: default_extractor(),
            remotes: Vec::new(),
            remote_timeout_secs: default_timeout_secs(),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, ServerError> {
        serde_json::from_slice(bytes).map_err(|e| ServerError::Config(e.to_string()))
    }

    pub fn remote_timeout(&self) -> Duration {
        Duration::from_secs(self.remote_timeout_secs)
    }

    /// Names are unique, `baseline` is reserved, endpoints are valid and the
    /// default extractor resolves.
    pub fn check(&self) -> Result<(), ServerError> {
        let mut names = std::collections::HashSet::new();
        for r in &self.remotes {
            if r.name == BASELINE {
                return Err(ServerError::Config(format!("remote name {BASELINE:?} is reserved")));
            }
            if !names.insert(r.name.as_str()) {
                return Err(ServerError::Config(format!("remote {:?} configured twice", r.name)));
            }
            r.descriptor().validate().map_err(|e| ServerError::Config(e.to_string()))?;
        }
        if self.default_extractor != BASELINE && !names.contains(self.default_extractor.as_str()) {
            return Err(ServerError::Config(format!("default extractor {:?} is not configured", self.default_extractor)));
        }
        Ok(())
    }
}
