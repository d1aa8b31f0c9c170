//! Core library for building radiology report information extraction systems.
//!
//! The crate is organized around a fact schema (facts, anchor entities,
//! modifiers and their value standardizers) that every other stage reads:
//!
//! * [`schema`] parses, validates and exports fact schemas and report templates.
//! * [`cas`] generates annotation-tool configuration and reads/writes RadEx CAS XMI.
//! * [`corpus`] prepares report corpora (encoding repair, dedup, sampling, sealing).
//! * [`iaa`] scores inter-annotator agreement over annotated documents.
//! * [`extract`] holds the extractor contract, the rule-based baseline, the
//!   remote inference client and evaluation metrics.
//! * [`fill`] maps extracted spans onto value standardizers.
//! * [`fhir`] converts templates and filled templates to FHIR Questionnaire resources.
//!
//! Batch entry points accept an [`exec::Strategy`]; with the `parallel` feature
//! (on by default) they fan out over rayon, otherwise they run sequentially.

pub mod cas;
pub mod corpus;
pub mod exec;
pub mod extract;
pub mod fhir;
pub mod fill;
pub mod iaa;
pub mod schema;
pub mod text;
mod xml;

pub use cas::RadExCasDocument;
pub use exec::Strategy;
pub use extract::{ExtractedFact, Extractor, ExtractorDescriptor};
pub use fill::{fill_template, FilledTemplate};
pub use schema::{FactSchema, ReportTemplate};
pub use text::SpanOffset;
