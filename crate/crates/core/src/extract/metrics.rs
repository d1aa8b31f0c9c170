//! Extractive-QA token F1 and exact-entity micro F1.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::tokenize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub metric: String,
    pub per_item: Vec<f64>,
    pub average: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tp: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp: Option<usize>,
    #[serde(default, rename = "fn", skip_serializing_if = "Option::is_none")]
    pub fn_: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
}

fn bag(text: &str) -> HashMap<String, usize> {
    let mut out = HashMap::new();
    for t in tokenize(text) {
        *out.entry(t.surface.to_lowercase()).or_insert(0) += 1;
    }
    out
}

/// Bag-of-tokens F1 between a predicted and a gold answer, lowercased.
/// Both empty is 1.0; exactly one empty is 0.0.
pub fn evaluate_token_f1(pred: &str, gold: &str) -> f64 {
    let (p, g) = (bag(pred), bag(gold));
    let (np, ng): (usize, usize) = (p.values().sum(), g.values().sum());
    if np == 0 || ng == 0 {
        return if np == ng { 1.0 } else { 0.0 };
    }
    let common: usize = p.iter().map(|(t, c)| (*c).min(g.get(t).copied().unwrap_or(0))).sum();
    if common == 0 {
        return 0.0;
    }
    2.0 * common as f64 / (np + ng) as f64
}

/// One extractive-QA item: the prediction and every acceptable answer. No
/// answers means the gold answer is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaItem {
    #[serde(default)]
    pub id: String,
    pub prediction: String,
    #[serde(default)]
    pub answers: Vec<String>,
}

/// Mean over items of the best token F1 against any gold answer.
pub fn evaluate_token_f1_corpus(items: &[QaItem]) -> EvaluationResult {
    let per_item: Vec<f64> = items
        .iter()
        .map(|it| {
            if it.answers.is_empty() {
                evaluate_token_f1(&it.prediction, "")
            } else {
                it.answers.iter().map(|g| evaluate_token_f1(&it.prediction, g)).fold(0.0, f64::max)
            }
        })
        .collect();
    let average = if per_item.is_empty() { 1.0 } else { per_item.iter().sum::<f64>() / per_item.len() as f64 };
    EvaluationResult {
        metric: "token_f1".into(),
        per_item,
        average,
        tp: None,
        fp: None,
        fn_: None,
        precision: None,
        recall: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    pub label: String,
    pub begin: usize,
    pub end: usize,
}

impl Entity {
    pub fn new(label: impl Into<String>, begin: usize, end: usize) -> Self {
        Entity { label: label.into(), begin, end }
    }
}

/// One sequence-labelling item: predicted and gold entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceItem {
    #[serde(default)]
    pub id: String,
    pub pred: Vec<Entity>,
    pub gold: Vec<Entity>,
}

fn counts(pred: &[Entity], gold: &[Entity]) -> (usize, usize, usize) {
    let p: BTreeSet<&Entity> = pred.iter().collect();
    let g: BTreeSet<&Entity> = gold.iter().collect();
    let tp = p.intersection(&g).count();
    (tp, p.len() - tp, g.len() - tp)
}

fn prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    if tp + fp + fn_ == 0 {
        return (1.0, 1.0, 1.0);
    }
    let p = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let r = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f = 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
    (p, r, f)
}

/// Exact-tuple micro precision, recall and F1 over `(label, begin, end)`.
/// Duplicate tuples count once. Both empty is 1.0.
pub fn evaluate_entity_f1(pred: &[Entity], gold: &[Entity]) -> EvaluationResult {
    evaluate_entity_f1_corpus(&[SequenceItem { id: String::new(), pred: pred.to_vec(), gold: gold.to_vec() }])
}

/// Micro-averaged over all items; `per_item` holds each item's own F1.
pub fn evaluate_entity_f1_corpus(items: &[SequenceItem]) -> EvaluationResult {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut per_item = Vec::with_capacity(items.len());
    for it in items {
        let (a, b, c) = counts(&it.pred, &it.gold);
        per_item.push(prf(a, b, c).2);
        tp += a;
        fp += b;
        fn_ += c;
    }
    let (p, r, f) = prf(tp, fp, fn_);
    EvaluationResult {
        metric: "entity_f1".into(),
        per_item,
        average: f,
        tp: Some(tp),
        fp: Some(fp),
        fn_: Some(fn_),
        precision: Some(p),
        recall: Some(r),
    }
}
