//! Inter-annotator agreement over fact, anchor and modifier spans.
//!
//! Agreement between two annotators is one-to-one span matching per label,
//! scored as precision (against the first annotator), recall (against the
//! second) and F1. A label neither annotator used scores 1.0 (vacuous
//! agreement) so that macro averages are defined for every label.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cas::{Layer, RadExCasDocument};
use crate::exec::{self, Strategy};
use crate::schema::SchemaRef;
use crate::text::SpanOffset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Same label and identical offsets.
    #[default]
    Exact,
    /// Same label and a nonempty intersection.
    Overlap,
}

impl std::str::FromStr for MatchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(MatchMode::Exact),
            "overlap" => Ok(MatchMode::Overlap),
            other => Err(format!("unknown match mode {other:?} (expected exact or overlap)")),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum IaaError {
    #[error("document {doc_id} has different text for {annotator_a} and {annotator_b}")]
    TextMismatch { doc_id: String, annotator_a: String, annotator_b: String },
    #[error("annotators {0} and {1} share no documents")]
    NoSharedDocuments(String, String),
    #[error("annotator {annotator}: document {doc_id} follows {found}, expected {expected}")]
    SchemaMismatch { annotator: String, doc_id: String, expected: String, found: String },
    #[error("at least two annotation sets are required, got {0}")]
    TooFewAnnotators(usize),
    #[error("annotator id {0:?} appears more than once")]
    DuplicateAnnotator(String),
    #[error("annotation set {annotator} has no documents")]
    EmptySet { annotator: String },
}

/// All documents one annotator produced, keyed by document id.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationSet {
    annotator_id: String,
    documents: BTreeMap<String, RadExCasDocument>,
}

impl AnnotationSet {
    /// Fails when documents reference different schema versions.
    pub fn new(
        annotator_id: impl Into<String>,
        documents: impl IntoIterator<Item = RadExCasDocument>,
    ) -> Result<Self, IaaError> {
        let annotator_id = annotator_id.into();
        let documents: BTreeMap<String, RadExCasDocument> =
            documents.into_iter().map(|d| (d.doc_id.clone(), d)).collect();
        let mut refs = documents.values().map(|d| (d, d.schema_ref()));
        if let Some((_, first)) = refs.next() {
            for (doc, r) in refs {
                if r != first {
                    return Err(IaaError::SchemaMismatch {
                        annotator: annotator_id,
                        doc_id: doc.doc_id.clone(),
                        expected: first.to_string(),
                        found: r.to_string(),
                    });
                }
            }
        }
        Ok(AnnotationSet { annotator_id, documents })
    }

    pub fn annotator_id(&self) -> &str {
        &self.annotator_id
    }

    pub fn documents(&self) -> &BTreeMap<String, RadExCasDocument> {
        &self.documents
    }

    pub fn schema_ref(&self) -> Option<SchemaRef> {
        self.documents.values().next().map(RadExCasDocument::schema_ref)
    }
}

/// Layer-qualified label; fact, anchor and modifier ids live in separate
/// namespaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelKey {
    pub layer: Layer,
    pub label: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Support {
    pub count_a: usize,
    pub count_b: usize,
    pub matched: usize,
}

impl Support {
    pub fn new(count_a: usize, count_b: usize, matched: usize) -> Self {
        Support { count_a, count_b, matched }
    }

    pub fn precision(&self) -> f64 {
        ratio(self.matched, self.count_a, self.count_b)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.matched, self.count_b, self.count_a)
    }

    pub fn f1(&self) -> f64 {
        if self.count_a + self.count_b == 0 {
            return 1.0;
        }
        2.0 * self.matched as f64 / (self.count_a + self.count_b) as f64
    }

    pub fn swapped(&self) -> Self {
        Support { count_a: self.count_b, count_b: self.count_a, matched: self.matched }
    }
}

impl std::ops::Add for Support {
    type Output = Support;
    fn add(self, o: Support) -> Support {
        Support {
            count_a: self.count_a + o.count_a,
            count_b: self.count_b + o.count_b,
            matched: self.matched + o.matched,
        }
    }
}

impl std::iter::Sum for Support {
    fn sum<I: Iterator<Item = Support>>(iter: I) -> Support {
        iter.fold(Support::default(), |a, b| a + b)
    }
}

fn ratio(matched: usize, denom: usize, other: usize) -> f64 {
    match (denom, other) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        _ => matched as f64 / denom as f64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementScore {
    pub layer: Layer,
    pub label: String,
    pub annotator_a: String,
    pub annotator_b: String,
    pub mode: MatchMode,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: Support,
}

impl AgreementScore {
    fn new(key: &LabelKey, a: &str, b: &str, mode: MatchMode, support: Support) -> Self {
        AgreementScore {
            layer: key.layer,
            label: key.label.clone(),
            annotator_a: a.to_string(),
            annotator_b: b.to_string(),
            mode,
            precision: support.precision(),
            recall: support.recall(),
            f1: support.f1(),
            support,
        }
    }
}

/// One-to-one matching between two span lists of the same label, as index
/// pairs `(i, j)` into `a` and `b`.
///
/// Exact mode pairs equal spans in position order. Overlap mode seeds the
/// matching greedily by descending intersection length (ties by earliest
/// begin) and then grows it along augmenting paths, so the result always has
/// maximum cardinality.
pub fn match_spans(a: &[SpanOffset], b: &[SpanOffset], mode: MatchMode) -> Vec<(usize, usize)> {
    match mode {
        MatchMode::Exact => match_exact(a, b),
        MatchMode::Overlap => match_overlap(a, b),
    }
}

fn sorted_indices(spans: &[SpanOffset]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..spans.len()).collect();
    idx.sort_by_key(|&i| (spans[i], i));
    idx
}

fn match_exact(a: &[SpanOffset], b: &[SpanOffset]) -> Vec<(usize, usize)> {
    let (ia, ib) = (sorted_indices(a), sorted_indices(b));
    let (mut x, mut y) = (0, 0);
    let mut out = Vec::new();
    while x < ia.len() && y < ib.len() {
        match a[ia[x]].cmp(&b[ib[y]]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                out.push((ia[x], ib[y]));
                x += 1;
                y += 1;
            }
        }
    }
    out.sort_unstable();
    out
}

fn match_overlap(a: &[SpanOffset], b: &[SpanOffset]) -> Vec<(usize, usize)> {
    let mut edges: Vec<(usize, usize, usize)> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); a.len()];
    for (i, sa) in a.iter().enumerate() {
        for (j, sb) in b.iter().enumerate() {
            let w = sa.intersection_len(sb);
            if w > 0 {
                edges.push((i, j, w));
                adj[i].push(j);
            }
        }
    }
    edges.sort_by_key(|&(i, j, w)| (std::cmp::Reverse(w), a[i].begin.min(b[j].begin), a[i].begin, b[j].begin, i, j));
    let mut mate_a: Vec<Option<usize>> = vec![None; a.len()];
    let mut mate_b: Vec<Option<usize>> = vec![None; b.len()];
    for (i, j, _) in edges {
        if mate_a[i].is_none() && mate_b[j].is_none() {
            mate_a[i] = Some(j);
            mate_b[j] = Some(i);
        }
    }
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], mate_a: &mut [Option<usize>], mate_b: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if mate_b[j].is_none_or(|k| augment(k, adj, seen, mate_a, mate_b)) {
                mate_a[i] = Some(j);
                mate_b[j] = Some(i);
                return true;
            }
        }
        false
    }
    for i in 0..a.len() {
        if mate_a[i].is_none() {
            let mut seen = vec![false; b.len()];
            augment(i, &adj, &mut seen, &mut mate_a, &mut mate_b);
        }
    }
    mate_a.iter().enumerate().filter_map(|(i, m)| m.map(|j| (i, j))).collect()
}

fn label_spans(doc: Option<&RadExCasDocument>) -> BTreeMap<LabelKey, Vec<SpanOffset>> {
    let mut out: BTreeMap<LabelKey, Vec<SpanOffset>> = BTreeMap::new();
    if let Some(doc) = doc {
        for layer in Layer::ALL {
            for (label, span) in doc.layer_spans(layer) {
                out.entry(LabelKey { layer, label: label.to_string() }).or_default().push(span);
            }
        }
    }
    out
}

fn check_texts(a: &AnnotationSet, b: &AnnotationSet, doc_ids: &[&String]) -> Result<(), IaaError> {
    for id in doc_ids {
        if a.documents[*id].text != b.documents[*id].text {
            return Err(IaaError::TextMismatch {
                doc_id: (*id).clone(),
                annotator_a: a.annotator_id.clone(),
                annotator_b: b.annotator_id.clone(),
            });
        }
    }
    Ok(())
}

fn shared_docs<'a>(a: &'a AnnotationSet, b: &AnnotationSet) -> Result<Vec<&'a String>, IaaError> {
    let shared: Vec<&String> = a.documents.keys().filter(|k| b.documents.contains_key(*k)).collect();
    if shared.is_empty() {
        return Err(IaaError::NoSharedDocuments(a.annotator_id.clone(), b.annotator_id.clone()));
    }
    check_texts(a, b, &shared)?;
    Ok(shared)
}

type DocSupports = (String, BTreeMap<LabelKey, Support>);

fn pair_supports(
    a: &AnnotationSet,
    b: &AnnotationSet,
    mode: MatchMode,
    strategy: Strategy,
) -> Result<Vec<DocSupports>, IaaError> {
    let shared = shared_docs(a, b)?;
    Ok(exec::map(strategy, &shared, |id| {
        let sa = label_spans(a.documents.get(*id));
        let sb = label_spans(b.documents.get(*id));
        let keys: BTreeSet<&LabelKey> = sa.keys().chain(sb.keys()).collect();
        let empty = Vec::new();
        let per_label = keys
            .into_iter()
            .map(|k| {
                let (xa, xb) = (sa.get(k).unwrap_or(&empty), sb.get(k).unwrap_or(&empty));
                let matched = match_spans(xa, xb, mode).len();
                (k.clone(), Support::new(xa.len(), xb.len(), matched))
            })
            .collect();
        ((*id).clone(), per_label)
    }))
}

fn sum_by_label<'a>(docs: impl IntoIterator<Item = &'a DocSupports>) -> BTreeMap<LabelKey, Support> {
    let mut out: BTreeMap<LabelKey, Support> = BTreeMap::new();
    for (_, per_label) in docs {
        for (k, s) in per_label {
            let e = out.entry(k.clone()).or_default();
            *e = *e + *s;
        }
    }
    out
}

/// Per-label agreement of `a` against `b` over their shared documents.
/// Labels are those either annotator used on a shared document.
pub fn pairwise_span_scores(
    a: &AnnotationSet,
    b: &AnnotationSet,
    mode: MatchMode,
    strategy: Strategy,
) -> Result<Vec<AgreementScore>, IaaError> {
    let docs = pair_supports(a, b, mode, strategy)?;
    Ok(sum_by_label(&docs)
        .iter()
        .map(|(k, s)| AgreementScore::new(k, &a.annotator_id, &b.annotator_id, mode, *s))
        .collect())
}

/// Micro and macro aggregate over a group of per-label scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    /// `fact`, `anchor`, `modifier` or `all`.
    pub scope: String,
    pub support: Support,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    /// Unweighted mean of per-pair per-label F1; 1.0 when there are no labels.
    pub macro_f1: f64,
    pub label_count: usize,
}

impl Aggregate {
    fn from_scores<'a>(scope: &str, scores: impl IntoIterator<Item = &'a AgreementScore>) -> Self {
        let scores: Vec<&AgreementScore> = scores.into_iter().collect();
        let support: Support = scores.iter().map(|s| s.support).sum();
        let macro_f1 = if scores.is_empty() {
            1.0
        } else {
            scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64
        };
        Aggregate {
            scope: scope.to_string(),
            support,
            micro_precision: support.precision(),
            micro_recall: support.recall(),
            micro_f1: support.f1(),
            macro_f1,
            label_count: scores.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub doc_id: String,
    pub annotator_a: String,
    pub annotator_b: String,
    pub layer: Layer,
    pub support: Support,
    pub f1: f64,
}

/// The annotation report written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationReport {
    pub schema: SchemaRef,
    pub mode: MatchMode,
    pub generated_at: String,
    pub annotators: Vec<String>,
    pub vacuous_agreement: String,
    pub scores: Vec<AgreementScore>,
    pub aggregates: Vec<Aggregate>,
    pub documents: Vec<DocumentScore>,
}

impl AnnotationReport {
    pub fn aggregate(&self, scope: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.scope == scope)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn check_sets(sets: &[AnnotationSet]) -> Result<SchemaRef, IaaError> {
    if sets.len() < 2 {
        return Err(IaaError::TooFewAnnotators(sets.len()));
    }
    let mut seen = BTreeSet::new();
    for s in sets {
        if !seen.insert(s.annotator_id.as_str()) {
            return Err(IaaError::DuplicateAnnotator(s.annotator_id.clone()));
        }
    }
    let expected = sets[0]
        .schema_ref()
        .ok_or_else(|| IaaError::EmptySet { annotator: sets[0].annotator_id.clone() })?;
    for s in &sets[1..] {
        let (doc_id, found) = s
            .documents
            .values()
            .next()
            .map(|d| (d.doc_id.clone(), d.schema_ref()))
            .ok_or_else(|| IaaError::EmptySet { annotator: s.annotator_id.clone() })?;
        if found != expected {
            return Err(IaaError::SchemaMismatch {
                annotator: s.annotator_id.clone(),
                doc_id,
                expected: expected.to_string(),
                found: found.to_string(),
            });
        }
    }
    Ok(expected)
}

/// Scores every unordered pair of annotation sets and aggregates per layer.
pub fn aggregate_iaa(sets: &[AnnotationSet], mode: MatchMode, strategy: Strategy) -> Result<AnnotationReport, IaaError> {
    aggregate_iaa_at(sets, mode, strategy, Utc::now())
}

/// [`aggregate_iaa`] with an explicit generation timestamp.
pub fn aggregate_iaa_at(
    sets: &[AnnotationSet],
    mode: MatchMode,
    strategy: Strategy,
    generated_at: DateTime<Utc>,
) -> Result<AnnotationReport, IaaError> {
    let schema = check_sets(sets)?;
    let mut scores = Vec::new();
    let mut documents = Vec::new();
    for (x, a) in sets.iter().enumerate() {
        for b in &sets[x + 1..] {
            let docs = pair_supports(a, b, mode, strategy)?;
            for (doc_id, per_label) in &docs {
                for layer in Layer::ALL {
                    let support: Support = per_label.iter().filter(|(k, _)| k.layer == layer).map(|(_, s)| *s).sum();
                    documents.push(DocumentScore {
                        doc_id: doc_id.clone(),
                        annotator_a: a.annotator_id.clone(),
                        annotator_b: b.annotator_id.clone(),
                        layer,
                        support,
                        f1: support.f1(),
                    });
                }
            }
            scores.extend(
                sum_by_label(&docs)
                    .iter()
                    .map(|(k, s)| AgreementScore::new(k, &a.annotator_id, &b.annotator_id, mode, *s)),
            );
        }
    }
    let mut aggregates: Vec<Aggregate> = Layer::ALL
        .iter()
        .map(|l| Aggregate::from_scores(l.as_str(), scores.iter().filter(|s| s.layer == *l)))
        .collect();
    aggregates.push(Aggregate::from_scores("all", &scores));
    Ok(AnnotationReport {
        schema,
        mode,
        generated_at: generated_at.to_rfc3339_opts(SecondsFormat::Secs, true),
        annotators: sets.iter().map(|s| s.annotator_id.clone()).collect(),
        vacuous_agreement: "a label that neither annotator of a pair used scores precision, recall and f1 of 1.0"
            .into(),
        scores,
        aggregates,
        documents,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Disagreement {
    pub doc_id: String,
    pub layer: Layer,
    pub label: String,
    pub span: SpanOffset,
    /// Annotators that marked this exact span with this label.
    pub annotators: Vec<String>,
}

/// Every span that is not matched by all other annotators, sorted by
/// document and begin offset. Documents missing from some annotator count as
/// annotated with nothing by that annotator.
pub fn disagreement_list(sets: &[AnnotationSet], mode: MatchMode) -> Result<Vec<Disagreement>, IaaError> {
    check_sets(sets)?;
    let doc_ids: BTreeSet<&String> = sets.iter().flat_map(|s| s.documents.keys()).collect();
    for (x, a) in sets.iter().enumerate() {
        for b in &sets[x + 1..] {
            let shared: Vec<&String> = a.documents.keys().filter(|k| b.documents.contains_key(*k)).collect();
            check_texts(a, b, &shared)?;
        }
    }
    let mut out: BTreeMap<(String, usize, usize, Layer, String), BTreeSet<String>> = BTreeMap::new();
    for doc_id in doc_ids {
        let per_set: Vec<BTreeMap<LabelKey, Vec<SpanOffset>>> =
            sets.iter().map(|s| label_spans(s.documents.get(doc_id))).collect();
        let keys: BTreeSet<&LabelKey> = per_set.iter().flat_map(|m| m.keys()).collect();
        let empty = Vec::new();
        for key in keys {
            let spans: Vec<&Vec<SpanOffset>> = per_set.iter().map(|m| m.get(key).unwrap_or(&empty)).collect();
            let mut agreed: Vec<Vec<bool>> = spans.iter().map(|s| vec![true; s.len()]).collect();
            for x in 0..sets.len() {
                for y in 0..sets.len() {
                    if x == y {
                        continue;
                    }
                    let mut hit = vec![false; spans[x].len()];
                    for (i, _) in match_spans(spans[x], spans[y], mode) {
                        hit[i] = true;
                    }
                    for (flag, h) in agreed[x].iter_mut().zip(hit) {
                        *flag &= h;
                    }
                }
            }
            for (x, s) in spans.iter().enumerate() {
                for (span, ok) in s.iter().zip(&agreed[x]) {
                    if !ok {
                        out.entry((doc_id.clone(), span.begin, span.end, key.layer, key.label.clone())).or_default();
                    }
                }
            }
        }
        for ((d, b, e, layer, label), present) in out.iter_mut() {
            if d != doc_id {
                continue;
            }
            let key = LabelKey { layer: *layer, label: label.clone() };
            let span = SpanOffset::new(*b, *e);
            for (set, m) in sets.iter().zip(&per_set) {
                if m.get(&key).is_some_and(|v| v.contains(&span)) {
                    present.insert(set.annotator_id.clone());
                }
            }
        }
    }
    Ok(out
        .into_iter()
        .map(|((doc_id, b, e, layer, label), present)| Disagreement {
            doc_id,
            layer,
            label,
            span: SpanOffset::new(b, e),
            annotators: present.into_iter().collect(),
        })
        .collect())
}
