//! Command-line entry point: one subcommand per pipeline stage.
//!
//! Every stage reads and writes files only. Each output starts with a header
//! carrying the tool version and the hash of the effective [`RunConfig`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::jsonl::{self, Header};
use crate::memory::{self, ProcessMemory, DEFAULT_MAX_PREFIX};
use crate::provgraph::{
    compile_all, finish_graph, generate_synthetic_corpus, parse_documents, to_prov_jsonld, FieldMap, MaterialClass,
    ProcessGraph, SynthParams, GRAPH_STORE_FORMAT, WARNING_LOG_FORMAT,
};
use crate::retrieval::Embedders;
use crate::runner::{
    ablation_table, evaluate, grid, parse_prediction, run_ablation, score_external_predictions, AblationRow, ChatClient,
    EvalContext, EvalOutcome, EvalReport, HttpChatClient, MockChatClient, Policy, PolicyConfig, LOG_FORMAT, REPORT_FORMAT,
};
use crate::runner::ablation::ABLATION_FORMAT;
use crate::splitter::{
    contamination_matrix, split_by_type, split_dual, split_by_year, split_random, split_report, AssignmentLine, Granularity,
    ItemMeta, Partition, Protocol, SplitAssignment, SplitRecord, ASSIGNMENT_FORMAT,
};
use crate::taskgen::{build_candidate_pools, generate_benchmark, validate_all, BenchItem, SkipRecord, TaskGenConfig, BENCHMARK_FORMAT};
use crate::{seed, Error, Result};

static QUIET: AtomicBool = AtomicBool::new(false);

macro_rules! out {
    ($($t:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            print!($($t)*);
        }
    };
}

macro_rules! outln {
    ($($t:tt)*) => {
        if !QUIET.load(Ordering::Relaxed) {
            println!($($t)*);
        }
    };
}

pub const SYNTH_FORMAT: &str = "matproc-synthetic-corpus";
pub const AUDIT_FORMAT: &str = "matproc-contamination";
pub const SKIP_LOG_FORMAT: &str = "matproc-skip-log";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub graphs: Option<PathBuf>,
    pub benchmark: Option<PathBuf>,
    pub assignment: Option<PathBuf>,
    pub memory: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub protocol: Protocol,
    pub ratios: (f64, f64, f64),
    pub held_out: MaterialClass,
    pub dev_ratio: f64,
    pub granularity: Granularity,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            protocol: Protocol::Dual,
            ratios: (0.8, 0.1, 0.1),
            held_out: MaterialClass::Battery,
            dev_ratio: 0.1,
            granularity: Granularity::Item,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub paths: Paths,
    pub synth: SynthParams,
    pub field_map: FieldMap,
    pub taskgen: TaskGenConfig,
    pub split: SplitConfig,
    pub max_prefix_len: usize,
    pub policy: PolicyConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: None,
            paths: Paths::default(),
            synth: SynthParams::default(),
            field_map: FieldMap::default(),
            taskgen: TaskGenConfig::default(),
            split: SplitConfig::default(),
            max_prefix_len: DEFAULT_MAX_PREFIX,
            policy: PolicyConfig::default(),
        }
    }
}

impl RunConfig {
    /// Loads a TOML or JSON config, chosen by extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let format_err = |detail: String| Error::InvalidParams(format!("config {}: {detail}", path.display()));
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| format_err(e.to_string())),
            _ => toml::from_str(&text).map_err(|e| format_err(e.to_string())),
        }
    }

    /// Hash over every setting except file locations and worker count, so
    /// the same computation in another directory hashes the same.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = Paths::default();
        c.jobs = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        seed::sha256_hex(&bytes)[..16].to_string()
    }
}

#[derive(Debug, Parser)]
#[command(name = "matproc", version, about = "Materials-synthesis provenance benchmark and process-memory toolkit")]
pub struct Cli {
    /// TOML or JSON run configuration; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Suppress summaries on stdout; artifacts are still written.
    #[arg(short, long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a seeded synthetic PROV-JSONLD corpus.
    Synth(SynthArgs),
    /// Compile provenance documents into the graph store.
    Compile(CompileArgs),
    /// Generate the multiple-choice benchmark from a graph store.
    Genbench(GenbenchArgs),
    /// Partition benchmark items under a split protocol.
    Split(SplitArgs),
    /// DOI contamination between train and test partitions of protocol pairs.
    Audit(AuditArgs),
    /// Build process memory from the train partition.
    BuildMemory(BuildMemoryArgs),
    /// Evaluate one answer policy on one partition.
    Eval(EvalArgs),
    /// Run the ablation grid.
    Ablate(AblateArgs),
    /// Print saved evaluation or ablation reports as tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub n_records: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    /// File (JSON array, single document or NDJSON) or directory of such files.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub warnings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenbenchArgs {
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub k_options: Option<usize>,
    #[arg(long)]
    pub skips: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Benchmark file, or any JSON/JSONL item file with id, doi, year and class fields.
    #[arg(long)]
    pub bench: Option<PathBuf>,
    #[arg(long)]
    pub protocol: Option<Protocol>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// Comma-separated `train:test` protocol pairs, e.g. `dual:dual,dual:type`.
    #[arg(long, default_value = "dual:dual,dual:type,dual:year")]
    pub pairs: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildMemoryArgs {
    #[arg(long)]
    pub graphs: Option<PathBuf>,
    #[arg(long)]
    pub bench: Option<PathBuf>,
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_prefix_len: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct EvalInputs {
    #[arg(long)]
    pub bench: Option<PathBuf>,
    /// Assignment whose partition is evaluated.
    #[arg(long)]
    pub assignment: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub partition: String,
    #[arg(long)]
    pub memory: Option<PathBuf>,
    /// Assignment the memory was built from, for few-shot exemplars.
    /// Defaults to `--assignment`.
    #[arg(long)]
    pub train_assignment: Option<PathBuf>,
    /// Use the deterministic offline chat client even if an endpoint is configured.
    #[arg(long)]
    pub mock: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub inputs: EvalInputs,
    #[arg(long)]
    pub policy: Option<Policy>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Predictions file for `external_predictions`: JSON/JSONL of {item_id, answer}.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub inputs: EvalInputs,
    /// Blocks (reference, modules, scoring, retrieval, fusion, top_k) or
    /// sweeps like `k:1,2,4`. Defaults to every block.
    #[arg(long, value_delimiter = ',')]
    pub axes: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub files: Vec<PathBuf>,
}

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const ENDPOINT: i32 = 4;
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownCommand(_)
        | Error::ConfigConflict(_)
        | Error::InvalidParams(_)
        | Error::InvalidGridAxis(_)
        | Error::UnknownTask(_) => exit::USAGE,
        Error::EmbedderUnavailable(_) | Error::ClientTimeout(_) | Error::Endpoint(_) => exit::ENDPOINT,
        _ => exit::DATA,
    }
}

const COMMANDS: [&str; 9] = ["compile", "genbench", "split", "audit", "build-memory", "eval", "ablate", "report", "synth"];

/// Parses `argv` (program name first), runs the subcommand and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if let Some(first) = first_positional(&argv) {
        if !COMMANDS.contains(&first.as_str()) && first != "help" {
            eprintln!("error: {}", Error::UnknownCommand(first));
            return exit::USAGE;
        }
    }
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::USAGE } else { exit::OK };
        }
    };
    match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn first_positional(argv: &[OsString]) -> Option<String> {
    let mut it = argv.iter().skip(1).map(|a| a.to_string_lossy().to_string());
    while let Some(a) = it.next() {
        if a == "--config" || a == "--jobs" || a == "--seed" {
            it.next();
            continue;
        }
        if a.starts_with('-') {
            continue;
        }
        return Some(a);
    }
    None
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn need(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| Error::InvalidParams(format!("missing --{what} (flag or config paths.{what})")))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    set(&mut cfg.seed, cli.seed);
    QUIET.store(cli.quiet, Ordering::Relaxed);
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    if let Some(j) = cfg.jobs {
        // Only the first call in a process can size the global pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
        cfg.policy.max_in_flight = cfg.policy.max_in_flight.min(j.max(1));
    }
    cfg.taskgen.seed = cfg.seed;
    match cli.command {
        Command::Synth(a) => cmd_synth(cfg, a),
        Command::Compile(a) => cmd_compile(cfg, a),
        Command::Genbench(a) => cmd_genbench(cfg, a),
        Command::Split(a) => cmd_split(cfg, a),
        Command::Audit(a) => cmd_audit(cfg, a),
        Command::BuildMemory(a) => cmd_build_memory(cfg, a),
        Command::Eval(a) => cmd_eval(cfg, a),
        Command::Ablate(a) => cmd_ablate(cfg, a),
        Command::Report(a) => cmd_report(a),
    }
}

fn cmd_synth(mut cfg: RunConfig, a: SynthArgs) -> Result<()> {
    set(&mut cfg.synth.n_records, a.n_records);
    let out = need(&a.out.or(cfg.paths.corpus.clone()), "out")?;
    let graphs = generate_synthetic_corpus(&cfg.synth, cfg.seed)?;
    let docs: Vec<Value> = graphs.iter().map(to_prov_jsonld).collect();
    let header = Header::new(SYNTH_FORMAT, &cfg.hash()).with("seed", cfg.seed);
    jsonl::write(&out, &header, &docs)?;
    outln!("wrote {} synthetic records to {}", docs.len(), out.display());
    Ok(())
}

fn is_matproc_header(v: &Value) -> bool {
    v.get("format").is_some() && v.get("tool_version").is_some() && v.get("config_hash").is_some()
}

/// Raw documents from a file or a directory tree, each tagged with a
/// fallback id derived from its location.
pub fn read_corpus(path: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        let p = entry.path();
        let wanted = matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "jsonl" | "jsonld" | "ndjson"));
        if entry.file_type().is_file() && (wanted || p == path) {
            files.push(p.to_path_buf());
        }
    }
    let mut out = Vec::new();
    for f in files {
        let raw = fs::read(&f)?;
        let stem = f.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
        for (i, doc) in parse_documents(&raw)?.into_iter().enumerate() {
            if serde_json::from_slice::<Value>(&doc).is_ok_and(|v| is_matproc_header(&v)) {
                continue;
            }
            out.push((format!("{stem}-{i}"), doc));
        }
    }
    Ok(out)
}

fn cmd_compile(cfg: RunConfig, a: CompileArgs) -> Result<()> {
    let corpus = need(&a.corpus.or(cfg.paths.corpus.clone()), "corpus")?;
    let out = need(&a.out.or(cfg.paths.graphs.clone()), "out")?;
    let docs = read_corpus(&corpus)?;
    let (graphs, warnings) = compile_all(&docs, &cfg.field_map);
    let hash = cfg.hash();
    jsonl::write(&out, &Header::new(GRAPH_STORE_FORMAT, &hash), &graphs)?;
    let warn_path = a.warnings.unwrap_or_else(|| out.with_extension("warnings.jsonl"));
    jsonl::write(&warn_path, &Header::new(WARNING_LOG_FORMAT, &hash), &warnings)?;
    outln!(
        "compiled {} of {} documents into {} ({} warnings in {})",
        graphs.len(),
        docs.len(),
        out.display(),
        warnings.len(),
        warn_path.display()
    );
    Ok(())
}

pub fn read_graphs(path: &Path) -> Result<Vec<ProcessGraph>> {
    let (_, graphs) = jsonl::read::<ProcessGraph>(path, GRAPH_STORE_FORMAT)?;
    Ok(graphs)
}

pub fn read_bench(path: &Path) -> Result<Vec<BenchItem>> {
    let (_, items) = jsonl::read::<BenchItem>(path, BENCHMARK_FORMAT)?;
    Ok(items)
}

fn cmd_genbench(mut cfg: RunConfig, a: GenbenchArgs) -> Result<()> {
    set(&mut cfg.taskgen.k_options, a.k_options);
    let graphs_path = need(&a.graphs.or(cfg.paths.graphs.clone()), "graphs")?;
    let out = need(&a.out.or(cfg.paths.benchmark.clone()), "out")?;
    let graphs = read_graphs(&graphs_path)?;
    let graphs: Vec<ProcessGraph> = graphs
        .into_iter()
        .filter_map(|g| match finish_graph(g) {
            Ok(g) => Some(g),
            Err((id, e)) => {
                eprintln!("skipping {id}: {e}");
                None
            }
        })
        .collect();
    let pools = build_candidate_pools(&graphs)?;
    let bench = generate_benchmark(&graphs, &pools, &cfg.taskgen)?;
    let validity = validate_all(&bench.items, &graphs);
    if validity.valid != validity.checked {
        return Err(Error::GoldMismatch {
            item_id: validity.failures.first().map(|f| f.0.clone()).unwrap_or_default(),
            detail: format!("{} of {} items failed validation", validity.checked - validity.valid, validity.checked),
        });
    }
    let hash = cfg.hash();
    let header = Header::new(BENCHMARK_FORMAT, &hash)
        .with("k_options", cfg.taskgen.k_options)
        .with("template_version", crate::taskgen::TEMPLATE_VERSION);
    jsonl::write(&out, &header, &bench.items)?;
    let skip_path = a.skips.unwrap_or_else(|| out.with_extension("skips.jsonl"));
    jsonl::write::<SkipRecord>(&skip_path, &Header::new(SKIP_LOG_FORMAT, &hash), &bench.skipped)?;
    let mut per_task: BTreeMap<String, usize> = BTreeMap::new();
    for it in &bench.items {
        *per_task.entry(it.task.name().to_string()).or_default() += 1;
    }
    outln!("{:<26} {:>8} {:>9}", "Task", "Items", "Share (%)");
    for (t, n) in &per_task {
        outln!("{t:<26} {n:>8} {:>9.2}", 100.0 * *n as f64 / bench.items.len().max(1) as f64);
    }
    outln!("{:<26} {:>8}", "Total", bench.items.len());
    outln!("all {} items validated; {} skips logged", validity.checked, bench.skipped.len());
    Ok(())
}

fn str_field(v: &Value, keys: &[&str]) -> Option<String> {
    keys.iter().find_map(|k| match v.get(*k)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

/// Split metadata from a benchmark file or from loosely shaped item records.
pub fn read_item_meta(path: &Path) -> Result<Vec<ItemMeta>> {
    if let Ok(items) = read_bench(path) {
        return Ok(items.iter().map(ItemMeta::from).collect());
    }
    let raw = fs::read(path)?;
    let mut metas = Vec::new();
    for (i, doc) in parse_documents(&raw)?.into_iter().enumerate() {
        let v: Value = serde_json::from_slice(&doc).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        if is_matproc_header(&v) {
            continue;
        }
        let year = str_field(&v, &["year", "publication_year", "pub_year"]).and_then(|y| y.trim().parse::<i32>().ok());
        metas.push(ItemMeta {
            item_id: str_field(&v, &["item_id", "id", "uid", "qid"]).unwrap_or_else(|| format!("row-{i}")),
            doi: str_field(&v, &["doi", "paper_doi", "source_doi"]).unwrap_or_default().trim().to_lowercase(),
            year,
            material_class: MaterialClass::from_metadata(
                &str_field(&v, &["material_class", "class", "material_type", "category"]).unwrap_or_default(),
            ),
        });
    }
    if metas.is_empty() {
        return Err(Error::Format {
            path: path.to_path_buf(),
            detail: "no item records".into(),
        });
    }
    Ok(metas)
}

pub fn make_split<T: SplitRecord>(items: &[T], protocol: Protocol, cfg: &RunConfig) -> Result<SplitAssignment> {
    let s = &cfg.split;
    match protocol {
        Protocol::Random => split_random(items, s.ratios, cfg.seed),
        Protocol::Year => Ok(split_by_year(items)),
        Protocol::Type => split_by_type(items, s.held_out, s.dev_ratio, cfg.seed, s.granularity),
        Protocol::Dual => Ok(split_dual(items)),
    }
}

pub fn write_assignment(path: &Path, a: &SplitAssignment, hash: &str) -> Result<()> {
    let header = Header::new(ASSIGNMENT_FORMAT, hash).with("protocol", a.protocol);
    jsonl::write(path, &header, &a.lines())
}

pub fn read_assignment(path: &Path) -> Result<SplitAssignment> {
    let (header, lines) = jsonl::read::<AssignmentLine>(path, ASSIGNMENT_FORMAT)?;
    let protocol: Protocol = header.get("protocol").ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        detail: "assignment header lacks a protocol".into(),
    })?;
    Ok(SplitAssignment::from_lines(protocol, lines))
}

fn cmd_split(mut cfg: RunConfig, a: SplitArgs) -> Result<()> {
    set(&mut cfg.split.protocol, a.protocol);
    let bench = need(&a.bench.or(cfg.paths.benchmark.clone()), "bench")?;
    let out = need(&a.out.or(cfg.paths.assignment.clone()), "out")?;
    let items = read_item_meta(&bench)?;
    let assignment = make_split(&items, cfg.split.protocol, &cfg)?;
    write_assignment(&out, &assignment, &cfg.hash())?;
    out!("{}", split_report(&assignment, &items).to_table());
    if !assignment.warnings.is_empty() {
        eprintln!("{} items excluded for missing metadata", assignment.warnings.len());
    }
    Ok(())
}

fn cmd_audit(cfg: RunConfig, a: AuditArgs) -> Result<()> {
    let bench = need(&a.bench.or(cfg.paths.benchmark.clone()), "bench")?;
    let items = read_item_meta(&bench)?;
    let mut pairs = Vec::new();
    for p in a.pairs.split(',').filter(|p| !p.trim().is_empty()) {
        let (tr, te) = p
            .split_once(':')
            .ok_or_else(|| Error::InvalidParams(format!("pair {p} is not train:test")))?;
        pairs.push((tr.trim().parse::<Protocol>()?, te.trim().parse::<Protocol>()?));
    }
    let mut cache: BTreeMap<Protocol, SplitAssignment> = BTreeMap::new();
    for (tr, te) in &pairs {
        for p in [tr, te] {
            if !cache.contains_key(p) {
                cache.insert(*p, make_split(&items, *p, &cfg)?);
            }
        }
    }
    #[derive(Serialize)]
    struct Cell {
        train: Protocol,
        test: Protocol,
        contamination: f64,
    }
    let mut cells = Vec::new();
    for (tr, te) in &pairs {
        let named = vec![
            (format!("{tr}"), cache[tr].clone()),
            (format!("{te}"), cache[te].clone()),
        ];
        let m = contamination_matrix(&named, &items)?;
        let value = m.get(&tr.to_string(), &te.to_string()).unwrap_or(f64::NAN);
        outln!("{:<8} -> {:<8} {:.3}", format!("{tr}-train"), format!("{te}-test"), value);
        cells.push(Cell {
            train: *tr,
            test: *te,
            contamination: value,
        });
    }
    if let Some(out) = a.out {
        jsonl::write(&out, &Header::new(AUDIT_FORMAT, &cfg.hash()), &cells)?;
    }
    Ok(())
}

fn cmd_build_memory(mut cfg: RunConfig, a: BuildMemoryArgs) -> Result<()> {
    set(&mut cfg.max_prefix_len, a.max_prefix_len);
    let graphs = read_graphs(&need(&a.graphs.or(cfg.paths.graphs.clone()), "graphs")?)?;
    let items = read_bench(&need(&a.bench.or(cfg.paths.benchmark.clone()), "bench")?)?;
    let assignment = read_assignment(&need(&a.assignment.or(cfg.paths.assignment.clone()), "assignment")?)?;
    let out = need(&a.out.or(cfg.paths.memory.clone()), "out")?;
    let graphs: Vec<ProcessGraph> = graphs.into_iter().filter_map(|g| finish_graph(g).ok()).collect();
    let embedders = Embedders::from_env(cfg.seed);
    let mem = memory::build_for_split(&graphs, &items, &assignment, assignment.protocol.as_str(), cfg.max_prefix_len, &embedders)?;
    mem.save(&out, &cfg.hash())?;
    outln!(
        "memory for split {}: {} processes, {} steps, {} transitions -> {}",
        mem.split_id,
        mem.processes.len(),
        mem.step_library.len(),
        mem.transition_total(),
        out.display()
    );
    Ok(())
}

struct Loaded {
    items: Vec<BenchItem>,
    eval_items: Vec<BenchItem>,
    train_items: Vec<BenchItem>,
    split_id: String,
    memory: Option<ProcessMemory>,
}

fn load_eval_inputs(cfg: &RunConfig, a: &EvalInputs, need_memory: bool) -> Result<Loaded> {
    let items = read_bench(&need(&a.bench.clone().or(cfg.paths.benchmark.clone()), "bench")?)?;
    let assignment_path = need(&a.assignment.clone().or(cfg.paths.assignment.clone()), "assignment")?;
    let assignment = read_assignment(&assignment_path)?;
    let partition: Partition = a.partition.parse()?;
    let eval_items: Vec<BenchItem> = assignment.select(&items, partition).into_iter().cloned().collect();
    let train_assignment = match &a.train_assignment {
        Some(p) => read_assignment(p)?,
        None => assignment.clone(),
    };
    let train_items: Vec<BenchItem> = train_assignment.select(&items, Partition::Train).into_iter().cloned().collect();
    let memory = if need_memory {
        let mem = ProcessMemory::load(&need(&a.memory.clone().or(cfg.paths.memory.clone()), "memory")?)?;
        let train_ids = memory::train_graph_ids(&items, &train_assignment);
        mem.assert_train_only(&train_ids)?;
        Some(mem)
    } else {
        None
    };
    Ok(Loaded {
        items,
        eval_items,
        train_items,
        split_id: format!("{}/{}", assignment.protocol, partition.as_str()),
        memory,
    })
}

fn chat_client(mock: bool) -> Box<dyn ChatClient> {
    match HttpChatClient::from_env() {
        Some(c) if !mock => Box::new(c),
        _ => Box::new(MockChatClient::evidence_follower()),
    }
}

fn read_predictions(path: &Path) -> Result<BTreeMap<String, usize>> {
    let raw = fs::read(path)?;
    let mut out = BTreeMap::new();
    for doc in parse_documents(&raw)? {
        let v: Value = serde_json::from_slice(&doc)?;
        if is_matproc_header(&v) {
            continue;
        }
        let id = str_field(&v, &["item_id", "id"]).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            detail: "prediction without item_id".into(),
        })?;
        let answer = ["answer", "prediction", "pred", "answer_index"]
            .iter()
            .find_map(|k| v.get(*k).and_then(parse_prediction))
            .ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                detail: format!("prediction for {id} has no answer"),
            })?;
        out.insert(id, answer);
    }
    Ok(out)
}

fn write_outcome(outcome: &EvalOutcome, log: &Path, report: &Path, hash: &str, secs: f64) -> Result<()> {
    jsonl::write(log, &Header::new(LOG_FORMAT, hash).with("split_id", &outcome.report.split_id), &outcome.logs)?;
    jsonl::write(report, &Header::new(REPORT_FORMAT, hash), std::slice::from_ref(&outcome.report))?;
    // Timing lives beside the report so the report itself stays reproducible.
    let sidecar = report.with_extension("timing.json");
    fs::write(sidecar, serde_json::to_vec_pretty(&serde_json::json!({ "wall_clock_secs": secs }))?)?;
    Ok(())
}

fn cmd_eval(mut cfg: RunConfig, a: EvalArgs) -> Result<()> {
    set(&mut cfg.policy.policy, a.policy);
    set(&mut cfg.policy.k, a.k);
    set(&mut cfg.policy.lambda, a.lambda);
    let external = cfg.policy.policy == Policy::ExternalPredictions;
    if external != a.predictions.is_some() {
        return Err(Error::ConfigConflict(
            "--predictions is required by, and only valid with, --policy external_predictions".into(),
        ));
    }
    let log = need(&a.log.or(cfg.paths.log.clone()), "log")?;
    let report = need(&a.report.or(cfg.paths.report.clone()), "report")?;
    let needs_memory = !external && !matches!(cfg.policy.policy, Policy::Random | Policy::Oracle | Policy::ZeroShot | Policy::FewShot);
    let loaded = load_eval_inputs(&cfg, &a.inputs, needs_memory)?;
    let start = Instant::now();
    let outcome = if external {
        let preds = read_predictions(a.predictions.as_deref().expect("checked above"))?;
        score_external_predictions(&loaded.eval_items, &preds, &loaded.split_id)?
    } else {
        let embedders = Embedders::from_env(cfg.seed);
        let placeholder;
        let memory = match &loaded.memory {
            Some(m) => m,
            None => {
                placeholder = empty_memory();
                &placeholder
            }
        };
        let client = chat_client(a.inputs.mock);
        let ctx = EvalContext {
            split_id: &loaded.split_id,
            memory,
            embedders: &embedders,
            train_items: &loaded.train_items,
            client: Some(client.as_ref()),
        };
        evaluate(&loaded.eval_items, &ctx, &cfg.policy)?
    };
    let _ = loaded.items.len();
    write_outcome(&outcome, &log, &report, &cfg.hash(), start.elapsed().as_secs_f64())?;
    out!("{}", outcome.report.to_table());
    Ok(())
}

/// Memory stand-in for policies that never consult it.
fn empty_memory() -> ProcessMemory {
    ProcessMemory {
        split_id: String::new(),
        corpus_hash: String::new(),
        config: memory::MemoryConfig {
            max_prefix_len: DEFAULT_MAX_PREFIX,
            text_embedder: String::new(),
            structure_encoder: String::new(),
        },
        processes: Vec::new(),
        texts: Vec::new(),
        transitions: BTreeMap::new(),
        prefix_index: BTreeMap::new(),
        step_library: Vec::new(),
        embeddings: BTreeMap::new(),
        neighbourhoods: BTreeMap::new(),
    }
}

fn cmd_ablate(cfg: RunConfig, a: AblateArgs) -> Result<()> {
    let out = need(&a.out.or(cfg.paths.report.clone()), "out")?;
    let points = grid(&a.axes, &cfg.policy)?;
    let loaded = load_eval_inputs(&cfg, &a.inputs, true)?;
    let memory = loaded.memory.as_ref().expect("memory requested");
    let embedders = Embedders::from_env(cfg.seed);
    let client = chat_client(a.inputs.mock);
    let ctx = EvalContext {
        split_id: &loaded.split_id,
        memory,
        embedders: &embedders,
        train_items: &loaded.train_items,
        client: Some(client.as_ref()),
    };
    let rows = run_ablation(&points, &loaded.eval_items, &ctx)?;
    jsonl::write(&out, &Header::new(ABLATION_FORMAT, &cfg.hash()), &rows)?;
    out!("{}", ablation_table(&rows));
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    if a.files.is_empty() {
        return Err(Error::InvalidParams("report needs at least one file".into()));
    }
    for f in &a.files {
        if let Ok((_, rows)) = jsonl::read::<AblationRow>(f, ABLATION_FORMAT) {
            outln!("== {} ==", f.display());
            out!("{}", ablation_table(&rows));
            continue;
        }
        let (_, reports) = jsonl::read::<EvalReport>(f, REPORT_FORMAT)?;
        outln!("== {} ==", f.display());
        for r in &reports {
            out!("{}", r.to_table());
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_ignores_paths() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.paths.memory = Some("/tmp/elsewhere".into());
        b.jobs = Some(3);
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let c = RunConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = toml::from_str("seed = 9\n[policy]\nk = 4\n").unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.policy.k, 4);
        assert!(toml::from_str::<RunConfig>("bogus = 1").is_err());
    }

    #[test]
    fn unknown_command_is_usage_error() {
        assert_eq!(dispatch(["matproc", "frobnicate"]), exit::USAGE);
        assert_eq!(dispatch(["matproc", "eval", "--no-such-flag"]), exit::USAGE);
    }

    #[test]
    fn loose_item_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("items.jsonl");
        fs::write(
            &p,
            "{\"id\": \"q1\", \"doi\": \"10.1/A\", \"year\": \"2021\", \"material_type\": \"Battery\"}\n{\"id\": \"q2\", \"doi\": \"10.1/b\", \"year\": 2019, \"class\": \"magnetic\"}\n",
        )
        .unwrap();
        let m = read_item_meta(&p).unwrap();
        assert_eq!(m[0].doi, "10.1/a");
        assert_eq!(m[0].year, Some(2021));
        assert_eq!(m[0].material_class, MaterialClass::Battery);
        assert_eq!(m[1].material_class, MaterialClass::Magnetic);
    }
}
