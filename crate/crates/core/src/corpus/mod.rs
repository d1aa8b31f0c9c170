//! Report corpus preparation: ingestion, encoding repair, deduplication,
//! tokenization, stratified sampling, token statistics and sealed storage.
//!
//! Corpora are JSON-lines files, one [`ReportRecord`] per line.

mod encoding;
mod seal;
mod tokenize;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Strategy};
use crate::text::collapse_whitespace;

pub use encoding::{fix_encoding, suspicious_sequences};
pub use seal::{open_corpus, seal_corpus, SealError, SealedCorpus, SEAL_MAGIC, SEAL_VERSION};
pub use tokenize::{tokenize, Token};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub report_id: String,
    pub text: String,
    #[serde(default)]
    pub class_label: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ReportRecord {
    pub fn new(report_id: impl Into<String>, text: impl Into<String>) -> Self {
        ReportRecord { report_id: report_id.into(), text: text.into(), class_label: String::new(), metadata: BTreeMap::new() }
    }

    pub fn with_class(mut self, class_label: impl Into<String>) -> Self {
        self.class_label = class_label.into();
        self
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("report id {0:?} occurs more than once")]
    DuplicateReportId(String),
    #[error("sample of {requested} requested from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("sample size must be at least 1")]
    EmptySample,
    #[error("line {line}: {message}")]
    Jsonl { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered reports with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<ReportRecord>,
}

impl Corpus {
    pub fn new(records: Vec<ReportRecord>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::new();
        for r in &records {
            if !ids.insert(r.report_id.as_str()) {
                return Err(CorpusError::DuplicateReportId(r.report_id.clone()));
            }
        }
        Ok(Corpus { records })
    }

    pub fn records(&self) -> &[ReportRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ReportRecord> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self, CorpusError> {
        let mut records = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| CorpusError::Jsonl { line: i + 1, message: e.to_string() })?;
            records.push(rec);
        }
        Corpus::new(records)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

/// Applies [`fix_encoding`] to every report; returns the ids that changed.
pub fn fix_corpus_encoding(corpus: &Corpus, strategy: Strategy) -> (Corpus, Vec<String>) {
    let fixed = exec::map(strategy, corpus.records(), |r| {
        let (text, repaired) = fix_encoding(&r.text);
        (ReportRecord { text, ..r.clone() }, repaired)
    });
    let repaired_ids = fixed.iter().filter(|(_, rep)| *rep).map(|(r, _)| r.report_id.clone()).collect();
    (Corpus { records: fixed.into_iter().map(|(r, _)| r).collect() }, repaired_ids)
}

/// Keeps the first report of every whitespace-normalized text (case is
/// preserved) and lists the ids of every dropped report.
pub fn deduplicate(corpus: &Corpus) -> (Corpus, Vec<String>) {
    let mut seen = HashSet::new();
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for r in corpus.records() {
        if seen.insert(collapse_whitespace(&r.text)) {
            kept.push(r.clone());
        } else {
            removed.push(r.report_id.clone());
        }
    }
    (Corpus { records: kept }, removed)
}

/// Largest-remainder allocation of `n` over class sizes. Ties in the
/// remainder go to the lexicographically smaller class label.
pub fn proportional_quotas(class_sizes: &BTreeMap<String, usize>, n: usize) -> BTreeMap<String, usize> {
    let total: usize = class_sizes.values().sum();
    if total == 0 {
        return class_sizes.keys().map(|k| (k.clone(), 0)).collect();
    }
    let mut quotas: BTreeMap<String, usize> = BTreeMap::new();
    let mut remainders: Vec<(usize, &String)> = Vec::new();
    for (class, &size) in class_sizes {
        let exact = n * size;
        quotas.insert(class.clone(), exact / total);
        remainders.push((exact % total, class));
    }
    let assigned: usize = quotas.values().sum();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));
    for (_, class) in remainders.into_iter().take(n - assigned) {
        *quotas.get_mut(class).expect("class present") += 1;
    }
    quotas
}

/// Stratified sample of `n` reports: per-class quotas by largest remainder,
/// uniform seeded draw within each class. Output keeps corpus order.
pub fn stratified_sample(corpus: &Corpus, n: usize, seed: u64) -> Result<Corpus, CorpusError> {
    if n == 0 {
        return Err(CorpusError::EmptySample);
    }
    if n > corpus.len() {
        return Err(CorpusError::SampleTooLarge { requested: n, available: corpus.len() });
    }
    let mut members: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in corpus.records().iter().enumerate() {
        members.entry(r.class_label.clone()).or_default().push(i);
    }
    let sizes = members.iter().map(|(k, v)| (k.clone(), v.len())).collect();
    let quotas = proportional_quotas(&sizes, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::with_capacity(n);
    for (class, idx) in &members {
        let quota = quotas[class];
        let picks = rand::seq::index::sample(&mut rng, idx.len(), quota);
        chosen.extend(picks.into_iter().map(|p| idx[p]));
    }
    chosen.sort_unstable();
    Ok(Corpus { records: chosen.into_iter().map(|i| corpus.records[i].clone()).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub tokens: usize,
    pub types: usize,
    pub tokens_per_document_min: usize,
    pub tokens_per_document_mean: f64,
    pub tokens_per_document_max: usize,
    pub documents_per_class: BTreeMap<String, usize>,
}

pub fn corpus_stats(corpus: &Corpus, strategy: Strategy) -> CorpusStats {
    let per_doc: Vec<Vec<String>> =
        exec::map(strategy, corpus.records(), |r| tokenize(&r.text).into_iter().map(|t| t.surface).collect());
    let mut types: HashMap<&str, usize> = HashMap::new();
    for toks in &per_doc {
        for t in toks {
            *types.entry(t.as_str()).or_default() += 1;
        }
    }
    let counts: Vec<usize> = per_doc.iter().map(Vec::len).collect();
    let tokens: usize = counts.iter().sum();
    let mut documents_per_class = BTreeMap::new();
    for r in corpus.records() {
        *documents_per_class.entry(r.class_label.clone()).or_default() += 1;
    }
    CorpusStats {
        documents: corpus.len(),
        tokens,
        types: types.len(),
        tokens_per_document_min: counts.iter().copied().min().unwrap_or(0),
        tokens_per_document_mean: if counts.is_empty() { 0.0 } else { tokens as f64 / counts.len() as f64 },
        tokens_per_document_max: counts.iter().copied().max().unwrap_or(0),
        documents_per_class,
    }
}
