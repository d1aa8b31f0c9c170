use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radex_core::cas::{generate_annotation_config, parse_radex_cas};
use radex_core::corpus::Corpus;
use radex_core::extract::{build_baseline_extractor, PhraseBank};
use radex_core::fhir::{response_conformance, template_to_questionnaire, QuestionnaireResponse};
use radex_core::fill::fill_template;
use radex_core::schema::{derive_report_template, parse_fact_schema};
use tempfile::TempDir;

const TEXT: &str = "No suspicious focal findings distinguishable on the right side";

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn radex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radex")).args(args).env_remove("RADEX_CORPUS_KEY").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn schema_validate_counts() {
    let o = radex(&["schema", "validate", p(&fixture("mammography_schema.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "OK 24 facts / 24 anchors / 66 modifiers\n");
    let o = radex(&["schema", "validate", p(&fixture("table1_schema.json"))]);
    assert_eq!(stdout(&o), "OK 1 facts / 1 anchors / 3 modifiers\n");
}

#[test]
fn schema_validate_failures_and_usage() {
    let dir = TempDir::new().unwrap();
    let mut v: serde_json::Value = serde_json::from_slice(&fs::read(fixture("table1_schema.json")).unwrap()).unwrap();
    v["facts"][0]["modifier_ids"][1] = "ghost".into();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, v.to_string()).unwrap();
    let o = radex(&["schema", "validate", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("DANGLING_MODIFIER_REF"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());

    let o = radex(&["schema", "validate", p(&dir.path().join("missing.json"))]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(radex(&["schema", "frobnicate"]).status.code(), Some(2));
    assert_eq!(radex(&["iaa", "report", "only-one"]).status.code(), Some(2));
}

#[test]
fn thin_wrappers_match_library_output() {
    let dir = TempDir::new().unwrap();
    let schema_path = fixture("table1_schema.json");
    let schema = parse_fact_schema(&fs::read(&schema_path).unwrap()).unwrap();

    let o = radex(&["annotate", "gen-config", p(&schema_path)]);
    assert_eq!(stdout(&o), generate_annotation_config(&schema).to_canonical_json());

    let tpath = dir.path().join("t.json");
    let o = radex(&["schema", "template", p(&schema_path), "--id", "t1", "--output", p(&tpath)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let template = derive_report_template(&schema, "t1", &["mass_described".to_string()], None).unwrap();
    assert_eq!(fs::read_to_string(&tpath).unwrap(), template.to_canonical_json());

    let text = dir.path().join("report.txt");
    fs::write(&text, TEXT).unwrap();
    let phrases = fixture("table1_phrases.json");
    let o = radex(&[
        "fill", "run", "--schema", p(&schema_path), "--template", p(&tpath), "--text", p(&text), "--phrases", p(&phrases),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bank = PhraseBank::from_json(&fs::read(&phrases).unwrap()).unwrap();
    let facts = build_baseline_extractor(&schema, &bank).extract(TEXT);
    let expected = fill_template(&template, &schema, &facts, TEXT, "baseline").unwrap();
    assert_eq!(stdout(&o), expected.to_json());

    let o = radex(&[
        "fill", "run", "--schema", p(&schema_path), "--template", p(&tpath), "--text", p(&text), "--phrases", p(&phrases),
        "--format", "fhir",
    ]);
    let r: QuestionnaireResponse = serde_json::from_slice(&o.stdout).unwrap();
    assert!(response_conformance(&r, &template_to_questionnaire(&template, &schema).unwrap()).is_empty());
}

#[test]
fn pre_annotation_and_iaa() {
    let dir = TempDir::new().unwrap();
    let schema_path = fixture("table1_schema.json");
    let phrases = fixture("table1_phrases.json");
    let texts = [TEXT, "Benign focal findings on the left side."];
    for annotator in ["ann_a", "ann_b"] {
        fs::create_dir_all(dir.path().join(annotator)).unwrap();
    }
    for (i, t) in texts.iter().enumerate() {
        let text = dir.path().join(format!("r{i}.txt"));
        fs::write(&text, t).unwrap();
        for annotator in ["ann_a", "ann_b"] {
            let out = dir.path().join(annotator).join(format!("r{i}.xmi"));
            let o = radex(&[
                "extract", "run", "--schema", p(&schema_path), "--text", p(&text), "--phrases", p(&phrases), "--format", "xmi",
                "-o", p(&out),
            ]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        }
    }
    let doc = parse_radex_cas(&fs::read(dir.path().join("ann_a/r0.xmi")).unwrap()).unwrap();
    assert_eq!(doc.annotations.len(), 1);
    assert_eq!(doc.doc_id, "r0");

    let o = radex(&["iaa", "report", p(&dir.path().join("ann_a")), p(&dir.path().join("ann_b")), "--mode", "overlap"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let all = report["aggregates"].as_array().unwrap().iter().find(|a| a["scope"] == "all").unwrap();
    assert_eq!(all["micro_f1"], 1.0);

    let o = radex(&["iaa", "diff", p(&dir.path().join("ann_a")), p(&dir.path().join("ann_b"))]);
    assert_eq!(stdout(&o).trim(), "[]");

    // A RadEx CAS is not an external export the default mapping understands.
    let o = radex(&["cas", "convert", p(&dir.path().join("ann_a/r0.xmi")), "--schema", p(&schema_path)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("org.radex.types"), "{}", stderr(&o));
}

#[test]
fn corpus_pipeline_and_sealing() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("c.jsonl");
    fs::write(
        &corpus,
        concat!(
            "{\"report_id\":\"a\",\"text\":\"Kein Herd rechts.\",\"class_label\":\"x\"}\n",
            "{\"report_id\":\"b\",\"text\":\"Kein  Herd rechts.\",\"class_label\":\"x\"}\n",
            "{\"report_id\":\"c\",\"text\":\"GrÃ¶ÃŸe 12 mm.\",\"class_label\":\"y\"}\n",
        ),
    )
    .unwrap();
    let o = radex(&["corpus", "dedup", p(&corpus)]);
    assert_eq!(stdout(&o).lines().count(), 2);
    assert!(stderr(&o).contains("dropped b"));
    let o = radex(&["corpus", "fix", p(&corpus)]);
    assert!(stdout(&o).contains("Größe"), "{}", stdout(&o));
    assert!(stderr(&o).contains("repaired c"));
    let o = radex(&["corpus", "stats", p(&corpus)]);
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(stats["documents"], 3);
    let o = radex(&["corpus", "sample", p(&corpus), "--n", "2", "--seed", "7"]);
    assert_eq!(stdout(&o).lines().count(), 2);

    let sealed = dir.path().join("c.rdxc");
    let o = radex(&["corpus", "seal", p(&corpus), "--key", "k1", "-o", p(&sealed)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = radex(&["corpus", "open", p(&sealed), "--key", "k1"]);
    let canonical = Corpus::from_jsonl(fs::read(&corpus).unwrap().as_slice()).unwrap().to_jsonl();
    assert_eq!(o.stdout, canonical);
    let o = Command::new(env!("CARGO_BIN_EXE_radex"))
        .args(["corpus", "open", p(&sealed)])
        .env("RADEX_CORPUS_KEY", "k1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let o = radex(&["corpus", "open", p(&sealed), "--key", "wrong"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(stderr(&o).contains("authentication failed"), "{}", stderr(&o));
    assert_eq!(radex(&["corpus", "open", p(&sealed)]).status.code(), Some(2));
}

#[test]
fn evaluation_commands() {
    let dir = TempDir::new().unwrap();
    let qa = dir.path().join("qa.json");
    fs::write(&qa, r#"[{"id":"1","prediction":"no suspicious focal findings","answers":["suspicious focal findings"]}]"#)
        .unwrap();
    let o = radex(&["extract", "eval-qa", p(&qa)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["average"].as_f64().unwrap() - 6.0 / 7.0).abs() < 1e-12);

    let seq = dir.path().join("seq.json");
    fs::write(
        &seq,
        r#"[{"id":"1","pred":[{"label":"A","begin":0,"end":5},{"label":"M","begin":6,"end":9}],
             "gold":[{"label":"A","begin":0,"end":5},{"label":"M","begin":6,"end":9},{"label":"F","begin":0,"end":20}]}]"#,
    )
    .unwrap();
    let o = radex(&["extract", "eval-seq", p(&seq)]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["average"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert_eq!(v["fn"], 1);
}
