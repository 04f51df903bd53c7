//! The `epx` command line.
//!
//! [`run`] takes argv plus output streams so the whole surface can be driven
//! in-process. Results go to `--output` (written atomically) or stdout;
//! diagnostics go to the error stream as JSON lines.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

use crate::corpus::{self, CorpusError, IngestOptions};
use crate::distinct::UserCounting;
use crate::export;
use crate::index::{EntityIndex, IndexConfig, IndexError};
use crate::measures::{self, Direction, Measure, MeasureError};
use crate::relations::{self, NeighborMode, NetworkVariant, RelationError};
use crate::spam::{self, NbModel, SpamError};
use crate::synth::{self, SynthError};
use crate::timeline::{self, Granularity, Period, TimelineError, Timestamp};

pub const THREADS_ENV: &str = "ENTITY_PULSE_THREADS";

const DEFAULT_DELTA: f64 = 2.0;
const DEFAULT_K: usize = 10;
const DEFAULT_MIN_SUPPORT: u64 = 1;
const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Parser)]
#[command(
    name = "epx",
    version,
    about = "Entity-centric temporal analytics over annotated text archives"
)]
struct Cli {
    /// JSON file with default option values; command-line flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a corpus, writing accepted rows in normalized form.
    Ingest(IngestArgs),
    /// Train a spam classifier from a `label,text` CSV.
    TrainSpam(TrainArgs),
    /// Remove records classified as spam.
    Filter(FilterArgs),
    /// Build an index file from a corpus.
    Index(IndexArgs),
    /// Print section statistics of an index file as JSON.
    Inspect(InspectArgs),
    /// One measure for one entity over every period of a window.
    Series(SeriesArgs),
    /// Top-K periods of a window for one measure.
    Topk(TopkArgs),
    /// Connectedness of an entity to another entity or a set.
    Connectedness(ConnArgs),
    /// Ranked k-Network of an entity in one period.
    Network(NetworkArgs),
    /// Generate a synthetic corpus or labeled spam corpus.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Counting {
    Exact,
    Sketch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ConnKind {
    Direct,
    Indirect,
    Set,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Neighbors {
    ExcludePair,
    Literal,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Destination file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Write rejected rows and reasons here.
    #[arg(long)]
    rejections: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    min_confidence: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    model: PathBuf,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    model: PathBuf,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    min_confidence: Option<f64>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    #[arg(long)]
    granularity: Option<Granularity>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum)]
    user_counting: Option<Counting>,
    #[arg(long, allow_hyphen_values = true)]
    min_confidence: Option<f64>,
    /// Drop spam with this model before indexing.
    #[arg(long)]
    spam_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct InspectArgs {
    #[arg(long)]
    index: PathBuf,
}

#[derive(Debug, Args)]
struct WindowArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    entity: String,
    /// First period (`YYYY`, `YYYY-MM` or `YYYY-MM-DD`).
    #[arg(long)]
    from: String,
    /// End of the window, exclusive: the window stops where this begins.
    #[arg(long)]
    to: String,
    /// Must match the index granularity when given.
    #[arg(long)]
    granularity: Option<Granularity>,
    #[arg(long)]
    measure: Measure,
}

#[derive(Debug, Args)]
struct SeriesArgs {
    #[command(flatten)]
    window: WindowArgs,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct TopkArgs {
    #[command(flatten)]
    window: WindowArgs,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "high")]
    direction: Direction,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct PeriodArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    entity: String,
    /// Any date-prefix inside the period (`YYYY`, `YYYY-MM` or `YYYY-MM-DD`).
    #[arg(long)]
    period: String,
    #[arg(long)]
    granularity: Option<Granularity>,
}

#[derive(Debug, Args)]
struct ConnArgs {
    #[command(flatten)]
    at: PeriodArgs,
    /// Other entity; repeat for `--kind set`.
    #[arg(long, required = true)]
    other: Vec<String>,
    #[arg(long, value_enum, default_value = "direct")]
    kind: ConnKind,
    #[arg(long, value_enum)]
    neighbors: Option<Neighbors>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
struct NetworkArgs {
    #[command(flatten)]
    at: PeriodArgs,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "plain")]
    variant: NetworkVariant,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    min_support: Option<u64>,
    #[command(flatten)]
    out: OutputArgs,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["spec", "labeled_docs"]))]
struct GenerateArgs {
    /// Scenario JSON.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Emit a labeled `label,text` corpus of this many documents instead.
    #[arg(long)]
    labeled_docs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    overlap: f64,
    #[arg(long, default_value_t = 0.5)]
    spam_fraction: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Where to write the ground-truth manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

/// Values the `--config` file may supply.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    granularity: Option<Granularity>,
    delta: Option<f64>,
    k: Option<usize>,
    min_support: Option<u64>,
    format: Option<Format>,
    min_confidence: Option<f64>,
    user_counting: Option<Counting>,
    alpha: Option<f64>,
    neighbors: Option<Neighbors>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{what}: {source}")]
    Io { what: String, source: io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Relation(#[from] RelationError),
    #[error(transparent)]
    Spam(#[from] SpamError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Io { .. } => "io",
            Self::Config(_) => "config",
            Self::Corpus(_) => "corpus",
            Self::Index(_) => "index",
            Self::Measure(_) => "measure",
            Self::Relation(_) => "relation",
            Self::Spam(_) => "spam",
            Self::Synth(_) => "synth",
            Self::Timeline(_) => "usage",
        }
    }

    fn exit_code(&self) -> i32 {
        match self.kind() {
            "usage" => 2,
            _ => 1,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let mut v = json!({"level": "error", "kind": self.kind(), "message": self.to_string()});
        if let Self::Synth(e) = self {
            v["field"] = json!(e.field);
        }
        v
    }
}

fn io_err(what: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
    let what = what.into();
    move |source| CliError::Io { what, source }
}

struct Ctx<'a> {
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
    file: FileConfig,
}

impl Ctx<'_> {
    fn warn(&mut self, message: &str, extra: serde_json::Value) {
        let mut v = json!({"level": "warning", "message": message});
        if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
            obj.extend(more);
        }
        let _ = writeln!(self.stderr, "{v}");
    }

    fn info(&mut self, message: &str, extra: serde_json::Value) {
        let mut v = json!({"level": "info", "message": message});
        if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
            obj.extend(more);
        }
        let _ = writeln!(self.stderr, "{v}");
    }

    /// Writes `body` to `path` atomically, or to stdout.
    fn emit<F>(&mut self, path: Option<&Path>, body: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        match path {
            Some(p) => {
                export::write_atomic(p, |w| body(w)).map_err(io_err(p.display().to_string()))
            }
            None => {
                let written = body(self.stdout).and_then(|()| self.stdout.flush());
                match written {
                    // The reader went away (e.g. piped into `head`).
                    Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                    other => other.map_err(io_err("stdout")),
                }
            }
        }
    }

    fn format(&self, flag: Option<Format>) -> Format {
        flag.or(self.file.format).unwrap_or(Format::Csv)
    }

    fn min_confidence(&self, flag: Option<f64>) -> IngestOptions {
        IngestOptions {
            min_confidence: flag.or(self.file.min_confidence),
        }
    }
}

fn json_body(v: &serde_json::Value) -> impl FnOnce(&mut dyn Write) -> io::Result<()> + '_ {
    move |w| {
        serde_json::to_writer_pretty(&mut *w, v)?;
        writeln!(w)
    }
}

fn load_index(path: &Path, expected: Option<Granularity>) -> Result<EntityIndex, CliError> {
    let index = EntityIndex::load(path)?;
    if let Some(g) = expected {
        if g != index.granularity() {
            return Err(CliError::Usage(format!(
                "--granularity {g} does not match the index granularity {}",
                index.granularity()
            )));
        }
    }
    Ok(index)
}

fn window(from: &str, to: &str) -> Result<(Timestamp, Timestamp), CliError> {
    let (start, _) = timeline::parse_period_arg(from)?;
    let (end, _) = timeline::parse_period_arg(to)?;
    if start >= end {
        return Err(CliError::Usage(format!(
            "--from {from} must precede --to {to}"
        )));
    }
    Ok((start, end))
}

fn period_of(arg: &str, g: Granularity) -> Result<Period, CliError> {
    let (start, _) = timeline::parse_period_arg(arg)?;
    Ok(timeline::assign(start, g))
}

fn warn_unknown(ctx: &mut Ctx, index: &EntityIndex, entity: &str) {
    if index.entity_id(entity).is_none() {
        ctx.warn("unknown entity", json!({"entity": entity}));
    }
}

fn cmd_ingest(ctx: &mut Ctx, a: IngestArgs) -> Result<(), CliError> {
    let ingested = corpus::ingest_path(&a.input, &ctx.min_confidence(a.min_confidence))?;
    ctx.emit(a.output.as_deref(), |w| {
        corpus::write_records(w, ingested.corpus.records())
    })?;
    if let Some(p) = &a.rejections {
        export::write_atomic(p, |w| corpus::write_rejections(w, &ingested.rejections))
            .map_err(io_err(p.display().to_string()))?;
    }
    let stats = serde_json::to_value(&ingested.stats).expect("stats serialize");
    ctx.info("ingested", json!({"stats": stats}));
    Ok(())
}

fn cmd_train(ctx: &mut Ctx, a: TrainArgs) -> Result<(), CliError> {
    let file = File::open(&a.input).map_err(io_err(a.input.display().to_string()))?;
    let examples = spam::read_labeled(BufReader::new(file))?;
    let model = NbModel::train(
        &examples,
        a.alpha.or(ctx.file.alpha).unwrap_or(DEFAULT_ALPHA),
    )?;
    let body = model.to_json();
    export::write_atomic(&a.model, |w| w.write_all(body.as_bytes()))
        .map_err(io_err(a.model.display().to_string()))?;
    ctx.info(
        "trained",
        json!({"examples": examples.len(), "vocabulary": model.vocabulary_len()}),
    );
    Ok(())
}

fn cmd_filter(ctx: &mut Ctx, a: FilterArgs) -> Result<(), CliError> {
    let model = NbModel::load(&a.model)?;
    let ingested = corpus::ingest_path(&a.input, &ctx.min_confidence(a.min_confidence))?;
    let outcome = spam::filter_corpus(&ingested.corpus, &model)?;
    if outcome.unclassified_count > 0 {
        ctx.warn(
            "records without text were kept unclassified",
            json!({"count": outcome.unclassified_count}),
        );
    }
    ctx.emit(a.output.as_deref(), |w| {
        corpus::write_records(w, outcome.corpus.records())
    })?;
    ctx.info(
        "filtered",
        json!({"removed": outcome.removed_count, "kept": outcome.corpus.len()}),
    );
    Ok(())
}

fn cmd_index(ctx: &mut Ctx, a: IndexArgs) -> Result<(), CliError> {
    let mut ingested = corpus::ingest_path(&a.input, &ctx.min_confidence(a.min_confidence))?;
    if let Some(p) = &a.spam_model {
        let model = NbModel::load(p)?;
        let outcome = spam::filter_corpus(&ingested.corpus, &model)?;
        ctx.info("filtered", json!({"removed": outcome.removed_count}));
        ingested.corpus = outcome.corpus;
    }
    let counting = match a.user_counting.or(ctx.file.user_counting) {
        Some(Counting::Sketch) => UserCounting::Sketch,
        _ => UserCounting::Exact,
    };
    let config = IndexConfig {
        granularity: a
            .granularity
            .or(ctx.file.granularity)
            .unwrap_or(Granularity::Month),
        delta: a.delta.or(ctx.file.delta).unwrap_or(DEFAULT_DELTA),
        user_counting: counting,
    };
    let index = EntityIndex::build(&ingested.corpus, &config)?;
    index.save(&a.output)?;
    ctx.info(
        "indexed",
        json!({
            "records": ingested.stats.record_count,
            "rejected": ingested.stats.rejected_count,
            "entities": index.entity_count(),
            "periods": index.slices().len(),
        }),
    );
    Ok(())
}

fn cmd_inspect(ctx: &mut Ctx, a: InspectArgs) -> Result<(), CliError> {
    let summary = EntityIndex::inspect(&a.index)?;
    let v = serde_json::to_value(&summary).expect("summary serializes");
    ctx.emit(None, json_body(&v))
}

fn cmd_series(ctx: &mut Ctx, a: SeriesArgs) -> Result<(), CliError> {
    let w = a.window;
    let index = load_index(&w.index, w.granularity.or(ctx.file.granularity))?;
    let (start, end) = window(&w.from, &w.to)?;
    warn_unknown(ctx, &index, &w.entity);
    let points = measures::series(&index, &w.entity, start, end, w.measure);
    match ctx.format(a.out.format) {
        Format::Csv => ctx.emit(a.out.output.as_deref(), |out| {
            export::series_csv(out, &points)
        }),
        Format::Json => ctx.emit(
            a.out.output.as_deref(),
            json_body(&export::series_json(&points)),
        ),
    }
}

fn cmd_topk(ctx: &mut Ctx, a: TopkArgs) -> Result<(), CliError> {
    let w = a.window;
    let index = load_index(&w.index, w.granularity.or(ctx.file.granularity))?;
    let (start, end) = window(&w.from, &w.to)?;
    warn_unknown(ctx, &index, &w.entity);
    let k = a.k.or(ctx.file.k).unwrap_or(DEFAULT_K);
    let ranked = measures::top_k_periods(&index, &w.entity, start, end, w.measure, k, a.direction)?;
    match ctx.format(a.out.format) {
        Format::Csv => ctx.emit(a.out.output.as_deref(), |out| {
            export::top_k_csv(out, &ranked)
        }),
        Format::Json => ctx.emit(
            a.out.output.as_deref(),
            json_body(&export::top_k_json(&ranked)),
        ),
    }
}

fn cmd_connectedness(ctx: &mut Ctx, a: ConnArgs) -> Result<(), CliError> {
    let index = load_index(&a.at.index, a.at.granularity.or(ctx.file.granularity))?;
    let period = period_of(&a.at.period, index.granularity())?;
    warn_unknown(ctx, &index, &a.at.entity);
    for o in &a.other {
        warn_unknown(ctx, &index, o);
    }
    let e = a.at.entity.as_str();
    let mode = match a.neighbors.or(ctx.file.neighbors) {
        Some(Neighbors::Literal) => NeighborMode::Literal,
        _ => NeighborMode::ExcludeQueryPair,
    };
    let (kind, rows): (&str, Vec<(String, Option<f64>)>) = match a.kind {
        ConnKind::Direct | ConnKind::Indirect => {
            if a.other.len() != 1 {
                return Err(CliError::Usage(
                    "--kind direct|indirect takes exactly one --other".into(),
                ));
            }
            let o = a.other[0].as_str();
            if a.kind == ConnKind::Direct {
                (
                    "direct",
                    vec![(
                        o.to_string(),
                        relations::direct_connectedness(&index, e, o, &period)?,
                    )],
                )
            } else {
                (
                    "indirect",
                    vec![(
                        o.to_string(),
                        relations::indirect_connectedness(&index, e, o, &period, mode)?,
                    )],
                )
            }
        }
        ConnKind::Set => {
            let set: Vec<&str> = a.other.iter().map(String::as_str).collect();
            (
                "set",
                vec![(
                    set.join(";"),
                    relations::connectedness_to_set(&index, e, &set, &period)?,
                )],
            )
        }
    };
    let start = timeline::format_timestamp(period.start())[..10].to_string();
    let end = timeline::format_timestamp(period.end())[..10].to_string();
    match ctx.format(a.out.format) {
        Format::Csv => ctx.emit(a.out.output.as_deref(), |w| {
            let mut out = csv::Writer::from_writer(w);
            let err = io::Error::other;
            out.write_record([
                "entity",
                "other",
                "period_start",
                "period_end",
                "kind",
                "value",
            ])
            .map_err(err)?;
            for (other, v) in &rows {
                let value = v.map(|x| x.to_string()).unwrap_or_default();
                out.write_record([e, other, &start, &end, kind, &value])
                    .map_err(err)?;
            }
            out.flush()
        }),
        Format::Json => {
            let v: Vec<_> = rows
                .iter()
                .map(|(other, v)| {
                    json!({"entity": e, "other": other, "period_start": start, "period_end": end, "kind": kind, "value": v})
                })
                .collect();
            ctx.emit(a.out.output.as_deref(), json_body(&json!(v)))
        }
    }
}

fn cmd_network(ctx: &mut Ctx, a: NetworkArgs) -> Result<(), CliError> {
    let index = load_index(&a.at.index, a.at.granularity.or(ctx.file.granularity))?;
    let period = period_of(&a.at.period, index.granularity())?;
    warn_unknown(ctx, &index, &a.at.entity);
    let k = a.k.or(ctx.file.k).unwrap_or(DEFAULT_K);
    let delta = a.delta.or(ctx.file.delta).unwrap_or(DEFAULT_DELTA);
    let min_support = a
        .min_support
        .or(ctx.file.min_support)
        .unwrap_or(DEFAULT_MIN_SUPPORT);
    let net = relations::network(
        &index,
        &a.at.entity,
        &period,
        k,
        a.variant,
        delta,
        min_support,
    )?;
    match ctx.format(a.out.format) {
        Format::Csv => ctx.emit(a.out.output.as_deref(), |w| export::network_csv(w, &net)),
        Format::Json => ctx.emit(
            a.out.output.as_deref(),
            json_body(&export::network_json(&net)),
        ),
    }
}

fn cmd_generate(ctx: &mut Ctx, a: GenerateArgs) -> Result<(), CliError> {
    if let Some(docs) = a.labeled_docs {
        let docs = synth::labeled_corpus(a.seed, docs, a.overlap, a.spam_fraction);
        return ctx.emit(a.output.as_deref(), |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["label", "text"])
                .map_err(io::Error::other)?;
            for (text, label) in &docs {
                out.write_record([label.as_str(), text])
                    .map_err(io::Error::other)?;
            }
            out.flush()
        });
    }
    let path = a.spec.as_ref().expect("clap enforces one source");
    let raw = std::fs::read_to_string(path).map_err(io_err(path.display().to_string()))?;
    let spec: synth::ScenarioSpec = serde_json::from_str(&raw).map_err(|e| {
        CliError::Synth(SynthError {
            field: "spec".into(),
            message: e.to_string(),
        })
    })?;
    let generated = synth::generate(&spec)?;
    ctx.emit(a.output.as_deref(), |w| generated.write_csv(w))?;
    let manifest = serde_json::to_value(&generated.manifest).expect("manifest serializes");
    match &a.manifest {
        Some(p) => export::write_atomic(p, |w| json_body(&manifest)(w))
            .map_err(io_err(p.display().to_string()))?,
        None => ctx.info("manifest", json!({"manifest": manifest})),
    }
    Ok(())
}

fn configure_threads(ctx: &mut Ctx) {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            // Fails only when the global pool already exists (e.g. repeated
            // in-process runs); the existing pool is kept.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        _ => ctx.warn(
            "ignoring invalid thread cap",
            json!({"variable": THREADS_ENV, "value": raw}),
        ),
    }
}

fn load_config(path: &Path) -> Result<FileConfig, CliError> {
    let raw = std::fs::read_to_string(path).map_err(io_err(path.display().to_string()))?;
    serde_json::from_str(&raw).map_err(|e| CliError::Config(e.to_string()))
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{}", e.render());
                return 0;
            }
            let err = CliError::Usage(e.render().to_string().trim().to_string());
            let _ = writeln!(stderr, "{}", err.to_json());
            return err.exit_code();
        }
    };
    let mut ctx = Ctx {
        stdout,
        stderr,
        file: FileConfig::default(),
    };
    configure_threads(&mut ctx);
    let result = (|| {
        if let Some(p) = &cli.config {
            ctx.file = load_config(p)?;
        }
        match cli.command {
            Command::Ingest(a) => cmd_ingest(&mut ctx, a),
            Command::TrainSpam(a) => cmd_train(&mut ctx, a),
            Command::Filter(a) => cmd_filter(&mut ctx, a),
            Command::Index(a) => cmd_index(&mut ctx, a),
            Command::Inspect(a) => cmd_inspect(&mut ctx, a),
            Command::Series(a) => cmd_series(&mut ctx, a),
            Command::Topk(a) => cmd_topk(&mut ctx, a),
            Command::Connectedness(a) => cmd_connectedness(&mut ctx, a),
            Command::Network(a) => cmd_network(&mut ctx, a),
            Command::Generate(a) => cmd_generate(&mut ctx, a),
        }
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(ctx.stderr, "{}", e.to_json());
            e.exit_code()
        }
    }
}
