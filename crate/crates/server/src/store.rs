//! Directory of canonical JSON artifacts with snapshot reads.
//!
//! Readers clone an `Arc<Snapshot>` once per request and see one consistent
//! state throughout. Writers are serialized, write a temp file and rename it
//! into place, then publish a new snapshot.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use radex_core::extract::{build_baseline_extractor, BaselineExtractor, PhraseBank};
use radex_core::schema::{parse_fact_schema, FactSchema, ReportTemplate};

use crate::ServerError;

#[derive(Debug)]
pub struct SchemaEntry {
    pub schema: FactSchema,
    pub baseline: BaselineExtractor,
}

#[derive(Debug, Default)]
pub struct Snapshot {
    pub schemas: BTreeMap<String, Arc<SchemaEntry>>,
    pub templates: BTreeMap<String, ReportTemplate>,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    current: RwLock<Arc<Snapshot>>,
    writer: Mutex<()>,
}

const SCHEMAS: &str = "schemas";
const TEMPLATES: &str = "templates";
const PHRASES: &str = "phrases";

/// Ids become file names, so they are restricted to a safe alphabet.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn json_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, ServerError> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if path.extension().is_some_and(|e| e == "json") && valid_id(stem) {
            out.push((stem.to_string(), fs::read(&path)?));
        }
    }
    out.sort();
    Ok(out)
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), ServerError> {
    let dir = path.parent().expect("store files live in a directory");
    fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{}.tmp", path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact")));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

impl Store {
    /// Loads every artifact; any invalid file aborts startup.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, ServerError> {
        let root = root.into();
        fs::create_dir_all(root.join(SCHEMAS))?;
        fs::create_dir_all(root.join(TEMPLATES))?;
        let mut snapshot = Snapshot::default();
        for (id, bytes) in json_files(&root.join(SCHEMAS))? {
            let schema = parse_fact_schema(&bytes).map_err(|e| ServerError::Store(format!("schemas/{id}.json: {e}")))?;
            if schema.schema_id != id {
                return Err(ServerError::Store(format!("schemas/{id}.json holds schema {:?}", schema.schema_id)));
            }
            let entry = Self::entry(&root, schema)?;
            snapshot.schemas.insert(id, Arc::new(entry));
        }
        for (id, bytes) in json_files(&root.join(TEMPLATES))? {
            let t = ReportTemplate::from_json(&bytes).map_err(|e| ServerError::Store(format!("templates/{id}.json: {e}")))?;
            if t.template_id != id {
                return Err(ServerError::Store(format!("templates/{id}.json holds template {:?}", t.template_id)));
            }
            snapshot.templates.insert(id, t);
        }
        Ok(Store { root, current: RwLock::new(Arc::new(snapshot)), writer: Mutex::new(()) })
    }

    fn entry(root: &Path, schema: FactSchema) -> Result<SchemaEntry, ServerError> {
        let bank_path = root.join(PHRASES).join(format!("{}.json", schema.schema_id));
        let bank = if bank_path.exists() {
            PhraseBank::from_json(&fs::read(&bank_path)?)
                .map_err(|e| ServerError::Store(format!("{}: {e}", bank_path.display())))?
        } else {
            PhraseBank::default()
        };
        let baseline = build_baseline_extractor(&schema, &bank);
        Ok(SchemaEntry { schema, baseline })
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        Arc::clone(&self.current.read().expect("snapshot lock poisoned"))
    }

    fn publish(&self, f: impl FnOnce(&Snapshot) -> Snapshot) {
        let mut cur = self.current.write().expect("snapshot lock poisoned");
        *cur = Arc::new(f(&cur));
    }

    /// Stores an already validated schema.
    pub fn put_schema(&self, schema: FactSchema) -> Result<(), ServerError> {
        let _w = self.writer.lock().expect("writer lock poisoned");
        let id = schema.schema_id.clone();
        write_atomic(&self.root.join(SCHEMAS).join(format!("{id}.json")), &schema.to_canonical_json())?;
        let entry = Arc::new(Self::entry(&self.root, schema)?);
        self.publish(|s| {
            let mut schemas = s.schemas.clone();
            schemas.insert(id, entry);
            Snapshot { schemas, templates: s.templates.clone() }
        });
        Ok(())
    }

    /// Stores an already checked template.
    pub fn put_template(&self, template: ReportTemplate) -> Result<(), ServerError> {
        let _w = self.writer.lock().expect("writer lock poisoned");
        let id = template.template_id.clone();
        write_atomic(&self.root.join(TEMPLATES).join(format!("{id}.json")), &template.to_canonical_json())?;
        self.publish(|s| {
            let mut templates = s.templates.clone();
            templates.insert(id, template);
            Snapshot { schemas: s.schemas.clone(), templates }
        });
        Ok(())
    }
}
