//! Sequential vs. rayon-parallel throughput of the batch entry points.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use radex_core::cas::RadExCasDocument;
use radex_core::corpus::{corpus_stats, Corpus, ReportRecord};
use radex_core::extract::{build_baseline_extractor, extract_batch, PhraseBank};
use radex_core::iaa::{aggregate_iaa, AnnotationSet, MatchMode};
use radex_core::schema::parse_fact_schema;
use radex_core::Strategy;

const STRATEGIES: [(&str, Strategy); 2] = [("sequential", Strategy::Sequential), ("parallel", Strategy::Parallel)];

fn reports(n: usize) -> Vec<String> {
    let neg = ["No", "Benign", "Suspicious", "No suspicious"];
    let side = ["left", "right", "unclear"];
    (0..n)
        .map(|i| {
            let mut s = String::new();
            for k in 0..8 {
                let j = i * 8 + k;
                s.push_str(&format!(
                    "{} focal findings on the {} side, size {},{} cm. ",
                    neg[j % neg.len()],
                    side[(j / 4) % side.len()],
                    j % 5 + 1,
                    j % 10
                ));
            }
            s
        })
        .collect()
}

fn bench(c: &mut Criterion) {
    let schema = parse_fact_schema(include_bytes!("../fixtures/table1_schema.json")).unwrap();
    let bank = PhraseBank::from_json(include_bytes!("../fixtures/table1_phrases.json")).unwrap();
    let extractor = build_baseline_extractor(&schema, &bank);
    let texts = reports(400);

    let mut g = c.benchmark_group("extract_batch");
    for (name, s) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| extract_batch(&extractor, &texts, s)));
    }
    g.finish();

    let corpus = Corpus::new(texts.iter().enumerate().map(|(i, t)| ReportRecord::new(format!("r{i}"), t.clone())).collect())
        .unwrap();
    let mut g = c.benchmark_group("corpus_stats");
    for (name, s) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| corpus_stats(&corpus, s)));
    }
    g.finish();

    // Two annotators: the baseline output and a copy with every other fact dropped.
    let docs: Vec<RadExCasDocument> = texts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut d = RadExCasDocument::new(format!("d{i}"), t.clone(), &schema);
            d.annotations = extractor.extract(t).iter().map(|f| f.to_annotation()).collect();
            d
        })
        .collect();
    let thinned = docs
        .iter()
        .cloned()
        .map(|mut d| {
            d.annotations = d.annotations.into_iter().step_by(2).collect();
            d
        })
        .collect::<Vec<_>>();
    let sets = vec![AnnotationSet::new("a", docs).unwrap(), AnnotationSet::new("b", thinned).unwrap()];
    let mut g = c.benchmark_group("aggregate_iaa");
    for (name, s) in STRATEGIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| aggregate_iaa(&sets, MatchMode::Overlap, s).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
