use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::LevelFilter;
use sha2::{Digest, Sha256};

use qanlu::convert::{answer_counts, emit_squad, merge_corpora, parse_squad, BuildOptions, ParseMode};
use qanlu::ingest::FrameOptions;
use qanlu::pipeline::{
    convert_records, parse_intent_inventory, score_predictions, ConvertConfig, Dataset,
    InputFormat, Task,
};
use qanlu::questions::load_catalog;
use qanlu::sample::{select, SampleManifest, SampleOptions, Strategy};
use qanlu::score::{aggregate_runs, load_predictions, DecodeOptions, EvalReport, SlotMatch};
use qanlu::schema::QaCorpus;

#[derive(Parser)]
#[command(name = "qanlu", version, about = "Slot filling and intent detection as extractive QA")]
struct Cli {
    /// Log informational messages as well as warnings.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an annotated NLU file into a SQuAD2.0 corpus.
    Convert(ConvertArgs),
    /// Draw a few-shot subset and write it with a manifest.
    Sample(SampleArgs),
    /// Concatenate SQuAD2.0 corpora.
    Merge(MergeArgs),
    /// Score predictions as slot/intent F1, or aggregate report files.
    Score(ScoreArgs),
    /// Print the QA items of a corpus.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "bio")]
    input_format: InputFormat,
    #[arg(long)]
    catalog: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Add yes/no intent questions.
    #[arg(long)]
    intents: bool,
    /// Intent labels, one per line; defaults to the labels found in the input.
    #[arg(long)]
    intent_inventory: Option<PathBuf>,
    /// Frame put before span-format utterances; `{}` receives the requested slots.
    #[arg(long, default_value = FrameOptions::DEFAULT_TEMPLATE)]
    frame_template: String,
    #[arg(long, default_value = " ")]
    frame_separator: String,
    /// Use bare utterances as contexts.
    #[arg(long)]
    no_prev_turn: bool,
    /// Group title; defaults to the input file stem.
    #[arg(long)]
    title: Option<String>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    input: PathBuf,
    /// Defaults to `span` for `.json` inputs and `bio` otherwise.
    #[arg(long)]
    input_format: Option<InputFormat>,
    #[arg(long)]
    out: PathBuf,
    /// Defaults to `<out>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Cover what is possible when a label has too few records.
    #[arg(long)]
    allow_partial: bool,
}

#[derive(Args)]
struct MergeArgs {
    /// Corpora to concatenate; the first one's version tag is kept.
    #[arg(required = true, num_args = 2..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// Gold NLU file.
    #[arg(long, required_unless_present = "aggregate")]
    gold: Option<PathBuf>,
    #[arg(long)]
    gold_format: Option<InputFormat>,
    #[arg(long, required_unless_present = "aggregate")]
    predictions: Option<PathBuf>,
    /// The corpus the predictions were made on.
    #[arg(long, required_unless_present = "aggregate")]
    corpus: Option<PathBuf>,
    #[arg(long, default_value = "both")]
    task: Task,
    /// Match slot values by utterance offsets instead of normalized strings.
    #[arg(long)]
    offsets: bool,
    #[arg(long, default_value_t = 0.0)]
    null_threshold: f64,
    /// Seed of the run, echoed into the report.
    #[arg(long)]
    seed: Option<u64>,
    /// Sample manifest whose strategy, n and seed are echoed into the report.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Catalog whose hash is echoed into the report.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Report files to summarize instead of scoring.
    #[arg(long, num_args = 1.., conflicts_with_all = ["gold", "predictions", "corpus"])]
    aggregate: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Only items of this record.
    #[arg(long)]
    record: Option<String>,
}

enum Failure {
    Lib(qanlu::Error),
    Usage(String),
}

impl From<qanlu::Error> for Failure {
    fn from(e: qanlu::Error) -> Self {
        Failure::Lib(e)
    }
}

impl Failure {
    fn kind(&self) -> &'static str {
        match self {
            Failure::Lib(e) => e.kind(),
            Failure::Usage(_) => "usage",
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Lib(e) => e.to_string(),
            Failure::Usage(m) => m.clone(),
        }
    }
}

fn lib<E: Into<qanlu::Error>>(e: E) -> Failure {
    Failure::Lib(e.into())
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| lib(qanlu::Error::io(path.display().to_string(), e)))
}

/// Writes via a temp file in the target directory and renames it into place.
fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let io_err = |e: std::io::Error| lib(qanlu::Error::io(path.display().to_string(), e));
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(contents.as_bytes()).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn guess_format(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => InputFormat::Span,
        _ => InputFormat::Bio,
    }
}

fn load_corpus(path: &Path, mode: ParseMode) -> CliResult<QaCorpus> {
    let parsed = parse_squad(&read(path)?, mode).map_err(lib)?;
    for warning in &parsed.warnings {
        log::warn!("{}: {warning}", path.display());
    }
    Ok(parsed.corpus)
}

fn cmd_convert(args: ConvertArgs) -> CliResult<String> {
    let catalog = load_catalog(&read(&args.catalog)?)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.catalog.display())))?;
    let dataset = Dataset::parse(&read(&args.input)?, args.input_format)?;
    let records = match args.input_format {
        InputFormat::Span => {
            let frame = FrameOptions::new(!args.no_prev_turn, &args.frame_template, args.frame_separator)
                .map_err(lib)?;
            dataset.framed_records(&frame)
        }
        InputFormat::Bio => dataset.records.clone(),
    };
    let intent_inventory = match &args.intent_inventory {
        Some(path) => Some(parse_intent_inventory(&read(path)?)),
        None => None,
    };
    let title = args.title.unwrap_or_else(|| {
        args.input
            .file_stem()
            .map_or_else(|| "nlu".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let config = ConvertConfig {
        build: BuildOptions {
            include_intents: args.intents,
            title,
        },
        intent_inventory,
    };
    let corpus = convert_records(&records, &catalog, &config)?;
    write_atomic(&args.out, &emit_squad(&corpus))?;
    let (answerable, impossible) = answer_counts(&corpus);
    Ok(format!(
        "records={} items={} answerable={answerable} impossible={impossible} out={}",
        records.len(),
        corpus.item_count(),
        args.out.display()
    ))
}

fn cmd_sample(args: SampleArgs) -> CliResult<String> {
    let strategy: Strategy = args.strategy.parse().map_err(lib)?;
    let format = args.input_format.unwrap_or_else(|| guess_format(&args.input));
    let dataset = Dataset::parse(&read(&args.input)?, format)?;
    let opts = SampleOptions {
        allow_partial: args.allow_partial,
    };
    let selection = select(&dataset.records, strategy, args.n, args.seed, opts).map_err(lib)?;
    for warning in &selection.warnings {
        log::warn!("{warning}");
    }
    let manifest = SampleManifest::new(&dataset.records, &selection, strategy, args.n, args.seed);
    let manifest_path = args.manifest.unwrap_or_else(|| {
        let mut name = args.out.clone().into_os_string();
        name.push(".manifest.json");
        PathBuf::from(name)
    });
    write_atomic(&args.out, &dataset.render_subset(&selection.indices))?;
    write_atomic(&manifest_path, &manifest.to_json())?;
    Ok(format!(
        "strategy={strategy} n={} seed={} sampled={} total={} out={} manifest={}",
        args.n,
        args.seed,
        manifest.sampled_records,
        manifest.total_records,
        args.out.display(),
        manifest_path.display()
    ))
}

fn cmd_merge(args: MergeArgs) -> CliResult<String> {
    let mut counts = Vec::with_capacity(args.inputs.len());
    let mut merged: Option<QaCorpus> = None;
    for path in &args.inputs {
        let corpus = load_corpus(path, ParseMode::Lenient)?;
        counts.push(corpus.item_count().to_string());
        merged = Some(match merged {
            None => corpus,
            Some(acc) => merge_corpora(&acc, &corpus).map_err(lib)?,
        });
    }
    let merged = merged.expect("clap requires two inputs");
    write_atomic(&args.out, &emit_squad(&merged))?;
    Ok(format!(
        "inputs={} input_items={} items={} out={}",
        args.inputs.len(),
        counts.join(","),
        merged.item_count(),
        args.out.display()
    ))
}

fn summary_fields(report: &EvalReport) -> Vec<String> {
    let mut fields = Vec::new();
    if let Some(s) = report.slot {
        fields.push(format!(
            "slot_precision={:.6} slot_recall={:.6} slot_f1={:.6}",
            s.precision, s.recall, s.f1
        ));
    }
    if let Some(s) = report.intent {
        fields.push(format!(
            "intent_precision={:.6} intent_recall={:.6} intent_f1={:.6}",
            s.precision, s.recall, s.f1
        ));
    }
    fields
}

fn cmd_aggregate(paths: &[PathBuf], out: Option<&Path>) -> CliResult<String> {
    let reports = paths
        .iter()
        .map(|p| {
            serde_json::from_str::<EvalReport>(&read(p)?)
                .map_err(|e| lib(qanlu::Error::json(p.display().to_string(), e)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let summary = aggregate_runs(&reports).map_err(lib)?;
    let json = summary.to_json();
    print!("{json}");
    if let Some(out) = out {
        write_atomic(out, &json)?;
    }
    let mut fields = vec![format!("runs={}", summary.runs)];
    for (task, metrics) in [("slot", summary.slot), ("intent", summary.intent)] {
        if let Some(m) = metrics {
            fields.push(format!(
                "{task}_f1_mean={:.6} {task}_f1_std={:.6}",
                m.f1.mean, m.f1.std
            ));
        }
    }
    Ok(fields.join(" "))
}

fn cmd_score(args: ScoreArgs) -> CliResult<String> {
    if !args.aggregate.is_empty() {
        return cmd_aggregate(&args.aggregate, args.out.as_deref());
    }
    let (gold_path, pred_path, corpus_path) = match (&args.gold, &args.predictions, &args.corpus) {
        (Some(g), Some(p), Some(c)) => (g, p, c),
        _ => {
            return Err(Failure::Usage(
                "--gold, --predictions and --corpus are required".into(),
            ))
        }
    };
    let gold_format = args.gold_format.unwrap_or_else(|| guess_format(gold_path));
    let gold = Dataset::parse(&read(gold_path)?, gold_format)?.records;
    let corpus = load_corpus(corpus_path, ParseMode::Strict)?;
    let loaded = load_predictions(&read(pred_path)?, Some(&corpus)).map_err(lib)?;
    for warning in &loaded.warnings {
        log::warn!("{}: {warning}", pred_path.display());
    }
    let mode = if args.offsets {
        SlotMatch::Offsets
    } else {
        SlotMatch::Value
    };
    let decode_opts = DecodeOptions {
        null_threshold: args.null_threshold,
    };
    let scored = score_predictions(&gold, &corpus, &loaded.predictions, args.task, mode, &decode_opts)
        .map_err(lib)?;
    for warning in &scored.warnings {
        log::warn!("{warning}");
    }
    let mut report = scored.report;
    if let Some(path) = &args.manifest {
        let manifest: SampleManifest = serde_json::from_str(&read(path)?)
            .map_err(|e| lib(qanlu::Error::json(path.display().to_string(), e)))?;
        report.run_seed = Some(manifest.seed);
        report.config.strategy = Some(manifest.strategy.to_string());
        report.config.sample_n = Some(manifest.n);
    }
    if let Some(seed) = args.seed {
        report.run_seed = Some(seed);
    }
    if let Some(path) = &args.catalog {
        let bytes = fs::read(path).map_err(|e| lib(qanlu::Error::io(path.display().to_string(), e)))?;
        report.config.catalog_sha256 = Some(sha256_hex(&bytes));
    }
    let json = report.to_json();
    match &args.out {
        Some(out) => write_atomic(out, &json)?,
        None => print!("{json}"),
    }
    Ok(summary_fields(&report).join(" "))
}

fn cmd_inspect(args: InspectArgs) -> CliResult<String> {
    let corpus = load_corpus(&args.corpus, ParseMode::Lenient)?;
    let mut shown = 0;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for paragraph in corpus.paragraphs() {
        let items: Vec<_> = paragraph
            .qas
            .iter()
            .filter(|q| match &args.record {
                Some(r) => qanlu::ItemId::parse(&q.id).is_some_and(|id| &id.record_id == r),
                None => true,
            })
            .collect();
        if items.is_empty() {
            continue;
        }
        let _ = writeln!(out, "context: {}", paragraph.context);
        for item in items {
            let answer = match item.answers.first() {
                Some(a) => format!("\"{}\"@{}", a.text, a.answer_start),
                None => "<impossible>".to_string(),
            };
            let _ = writeln!(out, "  {}\t{}\t{}", item.id, item.question, answer);
            shown += 1;
        }
    }
    Ok(format!("items={shown}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(if cli.verbose {
            LevelFilter::Info
        } else {
            LevelFilter::Warn
        })
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Convert(args) => cmd_convert(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Merge(args) => cmd_merge(args),
        Command::Score(args) => cmd_score(args),
        Command::Inspect(args) => cmd_inspect(args),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(failure) => {
            let message = serde_json::to_string(&failure.message()).expect("string serializes");
            eprintln!("error kind={} message={message}", failure.kind());
            ExitCode::FAILURE
        }
    }
}
