//! `radex`: command-line entry point for the RadEx pipeline.
//!
//! Exit codes: 0 success, 1 data or validation failure, 2 usage error.
//! Machine-readable output goes to stdout (or `--output`), diagnostics to
//! stderr.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radex_core::cas::{
    convert_external_cas, generate_annotation_config, parse_radex_cas, serialize_radex_cas, CasError,
    ExternalCasMapping, RadExCasDocument,
};
use radex_core::corpus::{
    corpus_stats, deduplicate, fix_corpus_encoding, open_corpus, seal_corpus, stratified_sample, Corpus, SealedCorpus,
};
use radex_core::extract::{
    build_baseline_extractor, evaluate_entity_f1_corpus, evaluate_token_f1_corpus, ExtractedFact, ExtractorDescriptor,
    PhraseBank, QaItem, RemoteExtractor, SequenceItem,
};
use radex_core::fhir::{filled_to_response, template_to_questionnaire};
use radex_core::fill::fill_template;
use radex_core::iaa::{aggregate_iaa, disagreement_list, AnnotationSet, MatchMode};
use radex_core::schema::{
    derive_report_template, export_uima_type_system, validate_schema, FactSchema, ReportTemplate,
};
use radex_core::Strategy;
use radex_server::ServerConfig;

#[derive(Parser)]
#[command(name = "radex", version, about = "Fact schemas, annotation tooling, extraction and template filling for radiology reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fact schema validation and export.
    #[command(subcommand)]
    Schema(SchemaCmd),
    /// Annotation tool configuration.
    #[command(subcommand)]
    Annotate(AnnotateCmd),
    /// CAS conversion.
    #[command(subcommand)]
    Cas(CasCmd),
    /// Inter-annotator agreement.
    #[command(subcommand)]
    Iaa(IaaCmd),
    /// Report corpus preparation.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Extraction and evaluation metrics.
    #[command(subcommand)]
    Extract(ExtractCmd),
    /// Template filling.
    #[command(subcommand)]
    Fill(FillCmd),
    /// Run the integration server.
    Serve(ServeArgs),
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of stdout.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SchemaCmd {
    /// Check every schema invariant.
    Validate { schema: PathBuf },
    /// Print the UIMA type system description.
    ExportUima {
        schema: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Derive a report template from a subset of facts.
    Template {
        schema: PathBuf,
        #[arg(long)]
        id: String,
        /// Comma-separated fact ids in template order; all facts when omitted.
        #[arg(long, value_delimiter = ',')]
        facts: Vec<String>,
        /// Modifier subset for one fact, as `fact=mod1,mod2`. Repeatable.
        #[arg(long = "modifiers")]
        modifiers: Vec<String>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand)]
enum AnnotateCmd {
    /// Generate the annotation configuration for a schema.
    GenConfig {
        schema: PathBuf,
        /// Emit the layer list in INCEpTION's layer-export shape.
        #[arg(long)]
        inception: bool,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand)]
enum CasCmd {
    /// Convert an annotation tool's XMI export into a RadEx CAS file.
    Convert {
        xmi: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Type mapping JSON; the default covers custom INCEpTION span layers.
        #[arg(long)]
        mapping: Option<PathBuf>,
        /// Document id; defaults to the file stem.
        #[arg(long)]
        doc_id: Option<String>,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Exact,
    Overlap,
}

impl From<Mode> for MatchMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => MatchMode::Exact,
            Mode::Overlap => MatchMode::Overlap,
        }
    }
}

#[derive(Args)]
struct IaaInput {
    /// One directory of RadEx CAS `.xmi` files per annotator; the directory
    /// name is the annotator id.
    #[arg(required = true, num_args = 2..)]
    annotators: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "exact")]
    mode: Mode,
    #[command(flatten)]
    out: Output,
}

#[derive(Subcommand)]
enum IaaCmd {
    /// Pairwise and aggregate agreement as an annotation report.
    Report(IaaInput),
    /// Every span not matched by all annotators.
    Diff(IaaInput),
}

#[derive(Args)]
struct KeyArg {
    /// Corpus key; prefer the environment variable over the command line.
    #[arg(long, env = "RADEX_CORPUS_KEY", hide_env_values = true)]
    key: String,
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Repair mis-decoded text; ids of repaired reports go to stderr.
    Fix {
        corpus: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Drop whitespace-normalized duplicates; dropped ids go to stderr.
    Dedup {
        corpus: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Stratified random sample by class label.
    Sample {
        corpus: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: Output,
    },
    /// Token and class statistics.
    Stats {
        corpus: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Encrypt a JSON-lines corpus.
    Seal {
        corpus: PathBuf,
        #[command(flatten)]
        key: KeyArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Decrypt a sealed corpus to JSON lines.
    Open {
        sealed: PathBuf,
        #[command(flatten)]
        key: KeyArg,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct ExtractorArgs {
    /// Phrase bank JSON for the baseline extractor.
    #[arg(long)]
    phrases: Option<PathBuf>,
    /// Remote inference endpoint; the baseline runs in-process when omitted.
    #[arg(long)]
    remote: Option<String>,
    #[arg(long, default_value_t = 30)]
    timeout_secs: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractFormat {
    Json,
    Xmi,
}

#[derive(Clone, Copy, ValueEnum)]
enum FillFormat {
    Filled,
    Fhir,
}

#[derive(Subcommand)]
enum ExtractCmd {
    /// Extract facts from one report; `--format xmi` writes a pre-annotated RadEx CAS.
    Run {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        text: PathBuf,
        #[command(flatten)]
        extractor: ExtractorArgs,
        #[arg(long, value_enum, default_value = "json")]
        format: ExtractFormat,
        #[command(flatten)]
        out: Output,
    },
    /// Extractive-QA token F1 over a JSON array of {id, prediction, answers}.
    EvalQa {
        items: PathBuf,
        #[command(flatten)]
        out: Output,
    },
    /// Exact-entity micro F1 over a JSON array of {id, pred, gold}.
    EvalSeq {
        items: PathBuf,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Subcommand)]
enum FillCmd {
    /// Fill a report template from a report text.
    Run {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        template: PathBuf,
        #[arg(long)]
        text: PathBuf,
        /// Use these extracted facts (JSON array) instead of running an extractor.
        #[arg(long, conflicts_with = "remote")]
        extracted: Option<PathBuf>,
        #[command(flatten)]
        extractor: ExtractorArgs,
        #[arg(long, value_enum, default_value = "filled")]
        format: FillFormat,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct ServeArgs {
    /// Server configuration JSON; other flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    store: Option<PathBuf>,
    #[arg(long)]
    bind: Option<std::net::SocketAddr>,
}

/// A data failure: printed to stderr, exit code 1.
struct Failure(String);

trait Context<T> {
    fn ctx(self, what: impl Display) -> Result<T, Failure>;
}

impl<T, E: Display> Context<T> for Result<T, E> {
    fn ctx(self, what: impl Display) -> Result<T, Failure> {
        self.map_err(|e| Failure(format!("{what}: {e}")))
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).ctx(path.display())
}

fn read_text(path: &Path) -> Result<String, Failure> {
    String::from_utf8(read(path)?).ctx(format!("{} is not UTF-8", path.display()))
}

fn emit(out: &Output, bytes: &[u8]) -> Outcome {
    match &out.output {
        Some(p) => fs::write(p, bytes).ctx(p.display()),
        None => io::stdout().lock().write_all(bytes).ctx("stdout"),
    }
}

fn pretty<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable output");
    s.push(b'\n');
    s
}

/// Structural parse plus full validation; violations are listed on stderr.
fn load_schema(path: &Path) -> Result<FactSchema, Failure> {
    let schema: FactSchema = serde_json::from_slice(&read(path)?).ctx(path.display())?;
    let violations = validate_schema(&schema);
    if violations.is_empty() {
        return Ok(schema);
    }
    for v in &violations {
        eprintln!("{v}");
    }
    Err(Failure(format!("{}: {} schema violation(s)", path.display(), violations.len())))
}

fn load_corpus(path: &Path) -> Result<Corpus, Failure> {
    let f = fs::File::open(path).ctx(path.display())?;
    Corpus::from_jsonl(BufReader::new(f)).ctx(path.display())
}

fn run_extractor(schema: &FactSchema, args: &ExtractorArgs, text: &str) -> Result<(Vec<ExtractedFact>, String), Failure> {
    match &args.remote {
        Some(url) => {
            let d = ExtractorDescriptor::remote("remote", url, schema.schema_ref());
            let r = RemoteExtractor::new(d, schema.clone(), Duration::from_secs(args.timeout_secs)).ctx("remote extractor")?;
            Ok((r.extract(text).ctx("remote extractor")?, url.clone()))
        }
        None => {
            let bank = match &args.phrases {
                Some(p) => PhraseBank::from_json(&read(p)?).ctx(p.display())?,
                None => PhraseBank::default(),
            };
            let ex = build_baseline_extractor(schema, &bank);
            if !ex.empty_lexicon().is_empty() {
                eprintln!("warning: facts without lexicon entries: {}", ex.empty_lexicon().join(", "));
            }
            Ok((ex.extract(text), "baseline".into()))
        }
    }
}

fn schema_cmd(cmd: SchemaCmd) -> Outcome {
    match cmd {
        SchemaCmd::Validate { schema } => {
            let s = load_schema(&schema)?;
            let c = s.counts();
            println!("OK {} facts / {} anchors / {} modifiers", c.facts, c.anchors, c.modifiers);
            Ok(())
        }
        SchemaCmd::ExportUima { schema, out } => emit(&out, export_uima_type_system(&load_schema(&schema)?).as_bytes()),
        SchemaCmd::Template { schema, id, facts, modifiers, out } => {
            let s = load_schema(&schema)?;
            let facts = if facts.is_empty() { s.facts.iter().map(|f| f.id.clone()).collect() } else { facts };
            let mut filter = BTreeMap::new();
            for m in &modifiers {
                let (fact, mods) =
                    m.split_once('=').ok_or_else(|| Failure(format!("--modifiers {m:?} is not fact=mod1,mod2")))?;
                let mods = mods.split(',').filter(|x| !x.is_empty()).map(str::to_string).collect();
                filter.insert(fact.to_string(), mods);
            }
            let t = derive_report_template(&s, &id, &facts, (!filter.is_empty()).then_some(&filter)).ctx("template")?;
            emit(&out, t.to_canonical_json().as_bytes())
        }
    }
}

fn cas_cmd(cmd: CasCmd) -> Outcome {
    let CasCmd::Convert { xmi, schema, mapping, doc_id, out } = cmd;
    let schema = load_schema(&schema)?;
    let mapping = match mapping {
        Some(p) => ExternalCasMapping::from_json(&read(&p)?).ctx(p.display())?,
        None => ExternalCasMapping::default(),
    };
    let doc_id = doc_id.unwrap_or_else(|| xmi.file_stem().and_then(|s| s.to_str()).unwrap_or("document").to_string());
    let doc = match convert_external_cas(&read(&xmi)?, &mapping, &schema, &doc_id) {
        Ok(d) => d,
        Err(e) => {
            if let CasError::OrphanEntity(issues) | CasError::InvalidLabels(issues) = &e {
                for i in issues {
                    eprintln!("{:?} {} {:?} at {}", i.kind, i.layer, i.label, i.span);
                }
            }
            return Err(Failure(format!("{}: {e}", xmi.display())));
        }
    };
    emit(&out, &serialize_radex_cas(&doc).ctx("serialize")?)
}

fn load_annotator(dir: &Path) -> Result<AnnotationSet, Failure> {
    let id = dir.file_name().and_then(|n| n.to_str()).unwrap_or("annotator").to_string();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .ctx(dir.display())?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xmi"))
        .collect();
    paths.sort();
    let docs: Vec<RadExCasDocument> =
        paths.iter().map(|p| parse_radex_cas(&read(p)?).ctx(p.display())).collect::<Result<_, _>>()?;
    AnnotationSet::new(id, docs).ctx(dir.display())
}

fn iaa_cmd(cmd: IaaCmd) -> Outcome {
    let (input, diff) = match cmd {
        IaaCmd::Report(i) => (i, false),
        IaaCmd::Diff(i) => (i, true),
    };
    let sets: Vec<AnnotationSet> = input.annotators.iter().map(|d| load_annotator(d)).collect::<Result<_, _>>()?;
    if diff {
        let d = disagreement_list(&sets, input.mode.into()).ctx("iaa")?;
        emit(&input.out, &pretty(&d))
    } else {
        let r = aggregate_iaa(&sets, input.mode.into(), Strategy::default()).ctx("iaa")?;
        emit(&input.out, r.to_json().as_bytes())
    }
}

fn corpus_cmd(cmd: CorpusCmd) -> Outcome {
    match cmd {
        CorpusCmd::Fix { corpus, out } => {
            let (fixed, ids) = fix_corpus_encoding(&load_corpus(&corpus)?, Strategy::default());
            for id in ids {
                eprintln!("repaired {id}");
            }
            emit(&out, &fixed.to_jsonl())
        }
        CorpusCmd::Dedup { corpus, out } => {
            let (kept, dropped) = deduplicate(&load_corpus(&corpus)?);
            for id in dropped {
                eprintln!("dropped {id}");
            }
            emit(&out, &kept.to_jsonl())
        }
        CorpusCmd::Sample { corpus, n, seed, out } => {
            emit(&out, &stratified_sample(&load_corpus(&corpus)?, n, seed).ctx("sample")?.to_jsonl())
        }
        CorpusCmd::Stats { corpus, out } => emit(&out, &pretty(&corpus_stats(&load_corpus(&corpus)?, Strategy::default()))),
        CorpusCmd::Seal { corpus, key, output } => {
            let sealed = seal_corpus(&load_corpus(&corpus)?, &key.key).ctx("seal")?;
            fs::write(&output, sealed.to_bytes()).ctx(output.display())
        }
        CorpusCmd::Open { sealed, key, out } => {
            let container = SealedCorpus::from_bytes(&read(&sealed)?).ctx(sealed.display())?;
            // Nothing is written unless authentication succeeded.
            let corpus = open_corpus(&container, &key.key).ctx(sealed.display())?;
            emit(&out, &corpus.to_jsonl())
        }
    }
}

fn extract_cmd(cmd: ExtractCmd) -> Outcome {
    match cmd {
        ExtractCmd::Run { schema, text, extractor, format, out } => {
            let s = load_schema(&schema)?;
            let body = read_text(&text)?;
            let (facts, _) = run_extractor(&s, &extractor, &body)?;
            match format {
                ExtractFormat::Json => emit(&out, &pretty(&facts)),
                ExtractFormat::Xmi => {
                    let doc_id = text.file_stem().and_then(|x| x.to_str()).unwrap_or("document");
                    let mut doc = RadExCasDocument::new(doc_id, body, &s);
                    doc.annotations = facts.iter().map(ExtractedFact::to_annotation).collect();
                    emit(&out, &serialize_radex_cas(&doc).ctx("serialize")?)
                }
            }
        }
        ExtractCmd::EvalQa { items, out } => {
            let items: Vec<QaItem> = serde_json::from_slice(&read(&items)?).ctx(items.display())?;
            emit(&out, &pretty(&evaluate_token_f1_corpus(&items)))
        }
        ExtractCmd::EvalSeq { items, out } => {
            let items: Vec<SequenceItem> = serde_json::from_slice(&read(&items)?).ctx(items.display())?;
            emit(&out, &pretty(&evaluate_entity_f1_corpus(&items)))
        }
    }
}

fn fill_cmd(cmd: FillCmd) -> Outcome {
    let FillCmd::Run { schema, template, text, extracted, extractor, format, out } = cmd;
    let s = load_schema(&schema)?;
    let t = ReportTemplate::from_json(&read(&template)?).ctx(template.display())?;
    let body = read_text(&text)?;
    let (facts, name) = match extracted {
        Some(p) => (serde_json::from_slice(&read(&p)?).ctx(p.display())?, p.display().to_string()),
        None => run_extractor(&s, &extractor, &body)?,
    };
    let filled = fill_template(&t, &s, &facts, &body, &name).ctx("fill")?;
    match format {
        FillFormat::Filled => emit(&out, filled.to_json().as_bytes()),
        FillFormat::Fhir => {
            let q = template_to_questionnaire(&t, &s).ctx("questionnaire")?;
            emit(&out, filled_to_response(&filled, &q).to_json().as_bytes())
        }
    }
}

fn serve_cmd(args: ServeArgs) -> Outcome {
    let mut config = match &args.config {
        Some(p) => ServerConfig::from_json(&read(p)?).ctx(p.display())?,
        None => ServerConfig::new(args.store.clone().expect("clap requires --store without --config")),
    };
    if let Some(store) = args.store {
        config.store = store;
    }
    if let Some(bind) = args.bind {
        config.bind = bind;
    }
    let rt = tokio::runtime::Runtime::new().ctx("runtime")?;
    eprintln!("listening on {}", config.bind);
    rt.block_on(radex_server::serve(config)).ctx("server")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Schema(c) => schema_cmd(c),
        Command::Annotate(AnnotateCmd::GenConfig { schema, inception, out }) => load_schema(&schema).and_then(|s| {
            let config = generate_annotation_config(&s);
            if inception {
                emit(&out, &pretty(&config.to_inception_layers()))
            } else {
                emit(&out, config.to_canonical_json().as_bytes())
            }
        }),
        Command::Cas(c) => cas_cmd(c),
        Command::Iaa(c) => iaa_cmd(c),
        Command::Corpus(c) => corpus_cmd(c),
        Command::Extract(c) => extract_cmd(c),
        Command::Fill(c) => fill_cmd(c),
        Command::Serve(a) => serve_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
