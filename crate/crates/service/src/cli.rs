//! Batch entry points. Exit status 2 is a usage error, 3 a data error and 4
//! an I/O error.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;
use vocalcode::analytics::{read_group_csv, AnalyticsError, Metric, TTestVariant};
use vocalcode::audio_io::{load_wav, slice, AudioError};
use vocalcode::log::{read_log_file, records_by_coder, LogError};
use vocalcode::manifest::{self, ManifestError};
use vocalcode::pitch::{read_f0_csv, track_pitch, write_f0_csv, F0Row, PitchConfig};
use vocalcode::scheme::{build_ground_truth_queue, PassLabels, QueueSpec};
use vocalcode::segmenter::{segment_audio, SegmenterConfig};
use vocalcode::{AnnotationClass, Phase, Segment};

use crate::api::{router, AnalysisSources, AppState};
use crate::audio::AudioLibrary;
use crate::reports::{analysis_report, consensus, coder_passes, observations, reliability_report, FullReport};
use crate::store::Store;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => EXIT_USAGE,
            Self::Data(_) => EXIT_DATA,
            Self::Io(_) => EXIT_IO,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "vocalcode", version, about = "Segment, annotate and analyze infant vocalization recordings")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split recordings into non-silent segments.
    Segment(SegmentArgs),
    /// Queue construction.
    #[command(subcommand)]
    Queue(QueueCommand),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Inter-rater agreement between two annotation logs.
    Kappa(KappaArgs),
    /// Per-segment fundamental frequency.
    Pitch(PitchArgs),
    /// Compare a metric between two groups of recordings.
    Analyze(AnalyzeArgs),
    /// Reliability plus class summary and group comparisons.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(required = true)]
    wavs: Vec<PathBuf>,
    #[arg(long, default_value_t = 25.0)]
    threshold_db: f64,
    #[arg(long, default_value_t = 100.0)]
    min_pause_ms: f64,
    #[arg(long, default_value_t = 20.0)]
    frame_ms: f64,
    #[arg(long, default_value_t = 10.0)]
    hop_ms: f64,
    /// `.jsonl` or `.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum QueueCommand {
    /// Shuffled ground-truth queue with re-presented duplicates.
    Build(QueueArgs),
}

#[derive(Debug, Args)]
struct QueueArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 200)]
    duplicates: usize,
    #[arg(long)]
    seed: u64,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    #[arg(long)]
    manifest: PathBuf,
    /// Directory holding `<recording>.wav` files.
    #[arg(long)]
    audio_dir: PathBuf,
    #[arg(long)]
    f0: Option<PathBuf>,
    #[arg(long)]
    groups: Option<PathBuf>,
    /// Log events between snapshots; 0 disables snapshots.
    #[arg(long, default_value_t = 500)]
    snapshot_every: usize,
}

#[derive(Debug, Args)]
struct CoderLogs {
    #[arg(long)]
    log_a: PathBuf,
    #[arg(long)]
    log_b: PathBuf,
    /// Needed when log A holds more than one coder.
    #[arg(long)]
    coder_a: Option<String>,
    /// Needed when log B holds more than one coder.
    #[arg(long)]
    coder_b: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct KappaArgs {
    #[command(flatten)]
    logs: CoderLogs,
    /// Also report kappa without pairs that use this class.
    #[arg(long)]
    exclude_class: Option<u8>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
struct PitchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    audio_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct GroupArgs {
    /// Table with a `recording_id` column and one column per grouping.
    #[arg(long)]
    groups: PathBuf,
    /// Grouping column; may be omitted when the table has only one.
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long)]
    welch: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long, value_parser = ["duration", "f0"])]
    metric: String,
    #[command(flatten)]
    groups: GroupArgs,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    logs: CoderLogs,
    #[arg(long)]
    f0: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    logs: CoderLogs,
    #[arg(long)]
    f0: Option<PathBuf>,
    #[arg(long)]
    groups: Option<PathBuf>,
    #[arg(long)]
    group_by: Option<String>,
    #[arg(long)]
    welch: bool,
    #[arg(long)]
    exclude_class: Option<u8>,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let stdout = std::io::stdout();
    match execute(cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Segment(a) => segment(a, out),
        Command::Queue(QueueCommand::Build(a)) => queue_build(a, out),
        Command::Serve(a) => serve(a),
        Command::Kappa(a) => kappa(a, out),
        Command::Pitch(a) => pitch(a, out),
        Command::Analyze(a) => analyze(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| io_err(path, e))
}

fn load_audio(path: &Path) -> Result<vocalcode::AudioBuffer, CliError> {
    if !path.is_file() {
        return Err(io_err(path, "no such file"));
    }
    load_wav(path).map_err(|e| match e {
        AudioError::Unreadable(_) => io_err(path, e),
        other => data_err(path, other),
    })
}

fn read_manifest(path: &Path) -> Result<Vec<Segment>, CliError> {
    let file = open(path)?;
    let parsed = if path.extension().is_some_and(|e| e == "csv") {
        manifest::read_csv(file)
    } else {
        manifest::read_jsonl(BufReader::new(file))
    };
    parsed.map_err(|e| match e {
        ManifestError::Io(_) => io_err(path, e),
        other => data_err(path, other),
    })
}

fn segment(a: SegmentArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = SegmenterConfig {
        threshold_db: a.threshold_db,
        min_pause_ms: a.min_pause_ms,
        frame_ms: a.frame_ms,
        hop_ms: a.hop_ms,
        ..Default::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut all = Vec::new();
    for path in &a.wavs {
        let buffer = load_audio(path)?;
        let source = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| data_err(path, "file name has no stem"))?;
        all.extend(segment_audio(&buffer, &source, &config).map_err(|e| data_err(path, e))?);
    }
    let mut w = create(&a.out)?;
    let written = if a.out.extension().is_some_and(|e| e == "csv") {
        manifest::write_csv(&mut w, &all)
    } else {
        manifest::write_jsonl(&mut w, &all)
    };
    written.map_err(|e| io_err(&a.out, e))?;
    w.flush().map_err(|e| io_err(&a.out, e))?;
    emit(out, &format!("{} segments from {} recordings\n", all.len(), a.wavs.len()))
}

fn queue_build(a: QueueArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let segments = read_manifest(&a.manifest)?;
    let spec = QueueSpec {
        segment_ids: segments.into_iter().map(|s| s.id).collect(),
        n_duplicates: a.duplicates,
        rng_seed: a.seed,
    };
    let queue = build_ground_truth_queue(&spec).map_err(|e| data_err(&a.manifest, e))?;
    let mut text = String::new();
    for item in &queue {
        text.push_str(&serde_json::to_string(item).expect("queue items serialize"));
        text.push('\n');
    }
    match a.out {
        Some(path) => {
            let mut w = create(&path)?;
            w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
            emit(out, &format!("{} queue items\n", queue.len()))
        }
        None => emit(out, &text),
    }
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let segments = read_manifest(&a.manifest)?;
    let f0 = a.f0.as_deref().map(read_f0).transpose()?.unwrap_or_default();
    let store = Store::open(&a.log, a.snapshot_every).map_err(|e| data_err(&a.log, e))?;
    let state = AppState {
        store: Arc::new(store),
        library: Arc::new(AudioLibrary::new(&segments, &a.audio_dir)),
        analysis: Arc::new(AnalysisSources { segments, f0, groups_csv: a.groups }),
    };
    let _ = tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .try_init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
    runtime.block_on(async move {
        let addr = format!("{}:{}", a.bind, a.port);
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Io(format!("{addr}: {e}")))?;
        tracing::info!(%addr, log = %a.log.display(), "serving");
        let store = state.store.clone();
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Io(e.to_string()))?;
        store.snapshot().map_err(|e| CliError::Io(e.to_string()))
    })
}

fn read_f0(path: &Path) -> Result<Vec<F0Row>, CliError> {
    read_f0_csv(open(path)?).map_err(|e| data_err(path, e))
}

/// First-pass and repeat ground-truth labels of the (single or named) coder in a log.
/// A coder name with that coder's ground-truth labels.
type Coder = (String, PassLabels);

fn coder_labels(path: &Path, coder: Option<&str>) -> Result<Coder, CliError> {
    let events = read_log_file(path).map_err(|e| match e {
        LogError::Io(_) => io_err(path, e),
        other => data_err(path, other),
    })?;
    let by_coder = records_by_coder(&events, Some(Phase::GroundTruth));
    let name = match coder {
        Some(c) => c.to_string(),
        None => match by_coder.keys().collect::<Vec<_>>().as_slice() {
            [only] => only.to_string(),
            [] => return Err(data_err(path, "no ground-truth labels")),
            many => {
                return Err(CliError::Usage(format!(
                    "{} holds coders {many:?}; choose one with --coder-a/--coder-b",
                    path.display()
                )))
            }
        },
    };
    let records = by_coder
        .get(&name)
        .ok_or_else(|| data_err(path, format!("no ground-truth labels from coder {name}")))?;
    Ok((name.clone(), coder_passes(records, &name)))
}

fn both_coders(logs: &CoderLogs) -> Result<(Coder, Coder), CliError> {
    let a = coder_labels(&logs.log_a, logs.coder_a.as_deref())?;
    let b = coder_labels(&logs.log_b, logs.coder_b.as_deref())?;
    if a.0 == b.0 && logs.log_a == logs.log_b {
        return Err(CliError::Usage("both sides name the same coder in the same log".into()));
    }
    Ok((a, b))
}

fn class_arg(code: Option<u8>) -> Result<Option<AnnotationClass>, CliError> {
    code.map(AnnotationClass::from_code)
        .transpose()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn render<T: serde::Serialize>(format: Format, value: &T, text: impl FnOnce(&T) -> String) -> String {
    match format {
        Format::Table => text(value),
        Format::Json => serde_json::to_string_pretty(value).expect("reports serialize") + "\n",
    }
}

fn kappa(a: KappaArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let exclude = class_arg(a.exclude_class)?;
    let ((na, la), (nb, lb)) = both_coders(&a.logs)?;
    let report = reliability_report((&na, &la), (&nb, &lb), exclude).map_err(|e| CliError::Data(e.to_string()))?;
    emit(out, &render(a.format, &report, |r| r.to_text()))
}

fn pitch(a: PitchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let segments = read_manifest(&a.manifest)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let config = PitchConfig::default();
    let rows = pool.install(|| -> Result<Vec<F0Row>, CliError> {
        let mut sources: Vec<&str> = segments.iter().map(|s| s.source.as_str()).collect();
        sources.sort();
        sources.dedup();
        let recordings: HashMap<&str, vocalcode::AudioBuffer> = sources
            .par_iter()
            .map(|&src| Ok((src, load_audio(&a.audio_dir.join(format!("{src}.wav")))?)))
            .collect::<Result<_, CliError>>()?;
        segments
            .par_iter()
            .map(|seg| {
                let clip = slice(&recordings[seg.source.as_str()], seg.start_ms, seg.end_ms)
                    .map_err(|e| CliError::Data(format!("segment {}: {e}", seg.id)))?;
                let track = track_pitch(&clip, &config).map_err(|e| CliError::Data(format!("segment {}: {e}", seg.id)))?;
                Ok(F0Row::from_track(seg.id.clone(), &track))
            })
            .collect()
    })?;
    let mut w = create(&a.out)?;
    write_f0_csv(&mut w, &rows).map_err(|e| io_err(&a.out, e))?;
    w.flush().map_err(|e| io_err(&a.out, e))?;
    let voiced = rows.iter().filter(|r| r.summary_f0_hz.is_some()).count();
    emit(out, &format!("{} segments, {} with an f0 estimate\n", rows.len(), voiced))
}

/// Picks the grouping column, defaulting to the only non-id column.
fn read_groups(path: &Path, field: Option<&str>) -> Result<BTreeMap<String, String>, CliError> {
    let field = match field {
        Some(f) => f.to_string(),
        None => {
            let mut reader = csv::Reader::from_reader(open(path)?);
            let headers = reader.headers().map_err(|e| data_err(path, e))?;
            let others: Vec<&str> = headers.iter().map(str::trim).filter(|h| *h != "recording_id").collect();
            match others.as_slice() {
                [only] => only.to_string(),
                _ => return Err(CliError::Usage(format!("{} has columns {others:?}; pick one with --group-by", path.display()))),
            }
        }
    };
    read_group_csv(open(path)?, &field).map_err(|e| match e {
        AnalyticsError::MissingColumn(_) => CliError::Usage(format!("{}: {e}", path.display())),
        other => data_err(path, other),
    })
}

fn analysis_inputs(
    manifest: &Path,
    logs: &CoderLogs,
    f0: Option<&Path>,
) -> Result<(Vec<vocalcode::analytics::Observation>, usize, Coder, Coder), CliError> {
    let segments = read_manifest(manifest)?;
    let f0 = f0.map(read_f0).transpose()?.unwrap_or_default();
    let (a, b) = both_coders(logs)?;
    let (agreed, unmatched) = consensus(&a.1, &b.1);
    Ok((observations(&segments, &agreed, &f0), unmatched, a, b))
}

fn analyze(a: AnalyzeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let metric: Metric = a.metric.parse().map_err(CliError::Usage)?;
    if metric == Metric::F0 && a.f0.is_none() {
        return Err(CliError::Usage("--metric f0 needs --f0 <f0.csv>".into()));
    }
    let groups = read_groups(&a.groups.groups, a.groups.group_by.as_deref())?;
    let (obs, unmatched, ..) = analysis_inputs(&a.manifest, &a.logs, a.f0.as_deref())?;
    let variant = if a.groups.welch { TTestVariant::Welch } else { TTestVariant::Pooled };
    let report = analysis_report(&obs, unmatched, Some(&groups), &[metric], variant)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let comparison = &report.comparisons[0];
    emit(out, &render(a.format, comparison, |c| c.to_text()))
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let exclude = class_arg(a.exclude_class)?;
    let groups = a.groups.as_deref().map(|g| read_groups(g, a.group_by.as_deref())).transpose()?;
    let (obs, unmatched, (na, la), (nb, lb)) = analysis_inputs(&a.manifest, &a.logs, a.f0.as_deref())?;
    let reliability = reliability_report((&na, &la), (&nb, &lb), exclude).map_err(|e| CliError::Data(e.to_string()))?;
    let metrics: &[Metric] = if a.f0.is_some() { &[Metric::Duration, Metric::F0] } else { &[Metric::Duration] };
    let variant = if a.welch { TTestVariant::Welch } else { TTestVariant::Pooled };
    let analysis = analysis_report(&obs, unmatched, groups.as_ref(), metrics, variant)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let full = FullReport { reliability, analysis };
    emit(out, &render(a.format, &full, |r| r.to_text()))
}
