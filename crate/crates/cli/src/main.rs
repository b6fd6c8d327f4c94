//! `devmood`: mine bug-tracker and mailing-list archives, score contributor
//! emotions, classify discussions, analyze activity patterns and predict
//! inactivity risk.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use devmood_core::activity::{self, LabeledInterval};
use devmood_core::churn::{self, BaselineMode, FeatureVector, PredictorMode, StreamPredictor};
use devmood_core::corpus::{
    self, bugzilla::BugzillaFormat, fetch, synth, Channel, Corpus,
};
use devmood_core::discussion::{self, PartitionRule};
use devmood_core::pipeline::{self, PipelineConfig, PipelineError};
use devmood_core::sentiment;
use devmood_core::stats::{self, Alternative, GridSpec};
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "devmood", version, about, max_term_width = 100)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse archives into a normalized JSONL corpus.
    Ingest(IngestArgs),
    /// Fetch bug comments from a Bugzilla REST endpoint.
    Fetch(FetchArgs),
    /// Generate a synthetic corpus with planted ground truth.
    Synth(SynthArgs),
    /// Score corpus messages with a sentiment lexicon.
    Score(ScoreArgs),
    /// Classify collective emotions of discussions.
    Classify(ClassifyArgs),
    /// Emotion moving-average time series.
    Timeseries(TimeseriesArgs),
    /// Compare polarity proportions across two partitions.
    Compare(CompareArgs),
    /// Interevent-time analysis and interval labeling.
    Activity(ActivityArgs),
    /// Per-interval emotion features.
    Features(FeaturesArgs),
    /// Fit the inactivity model (densities + binned posterior).
    Fit(FitArgs),
    /// Threshold predictions over features.
    Predict(PredictArgs),
    /// Bootstrap precision/recall of predictions.
    Evaluate(EvaluateArgs),
    /// Precision-recall curve over a threshold sweep.
    Sweep(SweepArgs),
    /// Streaming risk alerts over an event stream.
    Watch(WatchArgs),
    /// Statistical primitives on JSON inputs, for debugging.
    Stats(StatsArgs),
    /// Run the whole pipeline from a config file.
    Run(RunArgs),
    /// Render the report of a finished pipeline run.
    Report(ReportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ArchiveFormat {
    BugzillaJson,
    BugzillaXml,
    Mbox,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long, value_enum)]
    format: ArchiveFormat,
    /// Input files; repeatable.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long)]
    base_url: String,
    /// Bug id range, e.g. 1..500 (inclusive).
    #[arg(long)]
    bugs: String,
    /// Maximum requests per second.
    #[arg(long, default_value_t = 2.0)]
    rps: f64,
    #[arg(long, default_value_t = 3)]
    retries: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth JSONL (planted interval labels and discussion classes).
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Write the lexicon that reproduces the planted scores.
    #[arg(long)]
    lexicon_out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lexicon_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    /// Also score the thread subject of mailing-list messages.
    #[arg(long)]
    include_subject: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = discussion::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = discussion::DEFAULT_MIN_MESSAGES)]
    min_messages: usize,
    #[arg(long)]
    out: PathBuf,
    /// Ternary plot data CSV.
    #[arg(long)]
    ternary: Option<PathBuf>,
}

#[derive(Args)]
struct TimeseriesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = discussion::DEFAULT_WINDOW_DAYS)]
    window: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// JSON file with named "left" and "right" date ranges.
    #[arg(long, conflicts_with = "split_author")]
    periods: Option<PathBuf>,
    /// Compare discussions with vs without this author.
    #[arg(long)]
    split_author: Option<String>,
    #[arg(long, default_value_t = discussion::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ActivityArgs {
    #[arg(long)]
    corpus: PathBuf,
    /// Inactivity threshold in days.
    #[arg(long, default_value_t = activity::DEFAULT_INACTIVITY_DAYS)]
    threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    xmin: f64,
    #[arg(long, default_value_t = 10)]
    bins_per_decade: u32,
    #[arg(long)]
    out: PathBuf,
    /// Histogram of maximum interevent times.
    #[arg(long)]
    hist: Option<PathBuf>,
    /// JSON sidecar with the fitted exponent and boundary.
    #[arg(long)]
    fit: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BaselineArg {
    Causal,
    Global,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    intervals: PathBuf,
    #[arg(long, default_value_t = churn::DEFAULT_LOOKBACK_DAYS)]
    lookback: u32,
    #[arg(long, value_enum, default_value_t = BaselineArg::Causal)]
    baseline: BaselineArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Absolute,
    Deviation,
}

impl From<ModeArg> for PredictorMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Absolute => PredictorMode::Absolute,
            ModeArg::Deviation => PredictorMode::Deviation,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value_t = churn::DEFAULT_BANDWIDTH)]
    bandwidth: f64,
    #[arg(long, default_value_t = churn::DEFAULT_BINS)]
    bins: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Absolute)]
    mode: ModeArg,
    /// Predictor threshold; defaults to 1.9 (absolute) or 0.8 (deviation).
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = churn::DEFAULT_LOOKBACK_DAYS)]
    lookback: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    preds: PathBuf,
    /// Truth labels: an intervals.jsonl or features.jsonl file.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, default_value_t = churn::DEFAULT_BOOTSTRAP_REPS)]
    reps: u32,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::Absolute)]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.2)]
    lo: f64,
    #[arg(long, default_value_t = 4.6)]
    hi: f64,
    #[arg(long, default_value_t = 23)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WatchArgs {
    #[arg(long)]
    model: PathBuf,
    /// Predictor state, loaded if present and rewritten on exit.
    #[arg(long)]
    state: Option<PathBuf>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Flag overrides (precedence: flags > config > defaults).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    lexicon_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    bundle: PathBuf,
}

#[derive(Args)]
struct StatsArgs {
    #[command(subcommand)]
    primitive: StatsPrimitive,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AltArg {
    TwoSided,
    Greater,
    Less,
}

impl From<AltArg> for Alternative {
    fn from(a: AltArg) -> Self {
        match a {
            AltArg::TwoSided => Alternative::TwoSided,
            AltArg::Greater => Alternative::Greater,
            AltArg::Less => Alternative::Less,
        }
    }
}

#[derive(Subcommand)]
enum StatsPrimitive {
    /// One-sample proportion test against p0.
    OneProp {
        #[arg(long)]
        successes: u64,
        #[arg(long)]
        trials: u64,
        #[arg(long)]
        p0: f64,
        #[arg(long, value_enum, default_value_t = AltArg::TwoSided)]
        alt: AltArg,
    },
    /// Two-sample pooled proportion test.
    TwoProp {
        #[arg(long)]
        k1: u64,
        #[arg(long)]
        n1: u64,
        #[arg(long)]
        k2: u64,
        #[arg(long)]
        n2: u64,
        #[arg(long, value_enum, default_value_t = AltArg::TwoSided)]
        alt: AltArg,
    },
    /// Rank-sum test over two JSON arrays of numbers.
    Wilcoxon {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Gaussian kernel density estimate over a JSON array.
    Kde {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = churn::DEFAULT_BANDWIDTH)]
        bandwidth: f64,
        #[arg(long)]
        lo: f64,
        #[arg(long)]
        hi: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
    },
    /// Continuous power-law MLE over a JSON array.
    Powerlaw {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        xmin: f64,
        #[arg(long)]
        min_count: Option<usize>,
    },
    /// Log-binned histogram over a JSON array.
    LogHist {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = 10)]
        bins_per_decade: u32,
    },
    /// Bootstrap mean/std of the sample mean.
    Bootstrap {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long, default_value_t = churn::DEFAULT_BOOTSTRAP_REPS)]
        reps: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

/// Prediction row written by `predict` and read by `evaluate`.
#[derive(Serialize, Deserialize)]
struct PredRow {
    author: String,
    start_ts: i64,
    label: activity::IntervalLabel,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .downcast_ref::<PipelineError>()
                .map(|p| p.exit_code())
                .unwrap_or(2);
            ExitCode::from(code as u8)
        }
    }
}

fn read_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    corpus::read_corpus_jsonl(BufReader::new(file))
        .with_context(|| format!("reading corpus {}", path.display()))
}

fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    corpus::write_corpus_jsonl(&mut out, corpus)?;
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .with_context(|| format!("{}:{}: bad record", path.display(), i + 1))
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}: expected a JSON array", path.display()))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(args) => cmd_ingest(args),
        Command::Fetch(args) => cmd_fetch(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Score(args) => cmd_score(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Timeseries(args) => cmd_timeseries(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Activity(args) => cmd_activity(args),
        Command::Features(args) => cmd_features(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Watch(args) => cmd_watch(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn cmd_ingest(args: IngestArgs) -> Result<()> {
    let channel = match args.format {
        ArchiveFormat::Mbox => Channel::MailingList,
        _ => Channel::BugTracker,
    };
    let mut messages = Vec::new();
    let mut errors = 0usize;
    for path in &args.inputs {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let outcome = match args.format {
            ArchiveFormat::BugzillaJson => {
                corpus::bugzilla::parse_bugzilla_export(&bytes, BugzillaFormat::Json)?
            }
            ArchiveFormat::BugzillaXml => {
                corpus::bugzilla::parse_bugzilla_export(&bytes, BugzillaFormat::Xml)?
            }
            ArchiveFormat::Mbox => corpus::mbox::parse_mbox(&bytes),
        };
        for err in &outcome.record_errors {
            eprintln!("{}: {}: {}", path.display(), err.locator, err.reason);
        }
        errors += outcome.record_errors.len();
        messages.extend(outcome.messages);
    }
    let corpus = Corpus::new(channel, messages)?;
    write_corpus(&args.out, &corpus)?;
    let stats = corpus::corpus_summary(&corpus);
    eprintln!(
        "ingested {} messages, {} discussions, {} contributors ({} record errors)",
        stats.message_count, stats.discussion_count, stats.contributor_count, errors
    );
    Ok(())
}

fn cmd_fetch(args: FetchArgs) -> Result<()> {
    let (low, high) = args
        .bugs
        .split_once("..")
        .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)))
        .with_context(|| format!("invalid bug range {:?}, expected LOW..HIGH", args.bugs))?;
    let mut config = fetch::FetchConfig::new(args.base_url, args.rps);
    config.max_retries = args.retries;
    let outcome = fetch::fetch_bugzilla(&config, low, high)?;
    for err in &outcome.errors {
        eprintln!("{}: {}", err.locator, err.reason);
    }
    fs::write(&args.out, &outcome.export)?;
    eprintln!(
        "fetched {} bugs ({} errors)",
        outcome.bugs_fetched,
        outcome.errors.len()
    );
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let config: synth::SynthConfig = serde_json::from_str(&text)
        .with_context(|| format!("{}: invalid generator config", args.config.display()))?;
    let (corpus, truth) = synth::generate_synthetic_corpus(&config, args.seed)?;
    write_corpus(&args.out, &corpus)?;
    if let Some(path) = &args.truth {
        let mut out = BufWriter::new(File::create(path)?);
        synth::write_truth_jsonl(&mut out, &truth)?;
    }
    if let Some(dir) = &args.lexicon_out {
        sentiment::write_lexicon_dir(dir, &synth::synthetic_lexicon_terms(), &[], &[])?;
    }
    eprintln!(
        "generated {} messages, {} truth intervals",
        corpus.len(),
        truth.intervals.len()
    );
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let lexicon = sentiment::load_lexicon_dir(&args.lexicon_dir)?;
    let config = PipelineConfig {
        jobs: args.jobs,
        include_subject: args.include_subject,
        ..PipelineConfig::default()
    };
    let scored = pipeline::score_corpus(&corpus, &lexicon, &config)?;
    write_corpus(&args.out, &scored)?;
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let baseline = discussion::compute_baseline(&corpus)?;
    let table = discussion::classify_corpus(&corpus, &baseline, args.alpha, args.min_messages)?;
    fs::write(&args.out, pipeline::classes_csv(&table)?)?;
    if let Some(path) = &args.ternary {
        fs::write(path, pipeline::ternary_csv(&table)?)?;
    }
    eprintln!(
        "baseline P={:.4} N={:.4} U={:.4}; classified {} discussions, skipped {}",
        baseline.positive, baseline.negative, baseline.neutral, table.classified, table.skipped
    );
    Ok(())
}

fn cmd_timeseries(args: TimeseriesArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let series = discussion::emotion_timeseries(&corpus, args.window)?;
    fs::write(&args.out, pipeline::series_csv(&series)?)?;
    Ok(())
}

#[derive(Deserialize)]
struct PeriodsFile {
    left: pipeline::PeriodSpec,
    right: pipeline::PeriodSpec,
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let rule = match (&args.periods, &args.split_author) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)?;
            let periods: PeriodsFile = serde_json::from_str(&text)
                .with_context(|| format!("{}: invalid periods file", path.display()))?;
            PartitionRule::Periods {
                left: periods.left.resolve()?,
                right: periods.right.resolve()?,
            }
        }
        (None, Some(author)) => PartitionRule::AuthorPresence {
            author: author.clone(),
        },
        _ => bail!("exactly one of --periods or --split-author is required"),
    };
    let rows = discussion::compare_partitions(&corpus, &rule, args.alpha)?;
    fs::write(&args.out, pipeline::comparison_csv(&rows)?)?;
    for row in &rows {
        println!(
            "{} {} {} {}: p = {:.3e}, estimate = {:.4}",
            row.polarity, row.left_name, row.result.alternative, row.right_name,
            row.result.p_value, row.result.estimate
        );
    }
    Ok(())
}

fn cmd_activity(args: ActivityArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let timelines = activity::build_timelines(&corpus);
    let intervals = activity::label_corpus_intervals(&corpus, args.threshold);
    write_jsonl(&args.out, &intervals)?;
    match activity::max_interevent_analysis(
        &timelines,
        args.xmin,
        args.threshold,
        args.bins_per_decade,
    ) {
        Ok(analysis) => {
            if let Some(path) = &args.hist {
                let mut w = String::from("bin_lo,bin_hi,count,density\n");
                let h = &analysis.histogram;
                for (i, edge) in h.bin_edges.windows(2).enumerate() {
                    w.push_str(&format!(
                        "{:.6},{:.6},{},{:.6e}\n",
                        edge[0], edge[1], h.counts[i], h.densities[i]
                    ));
                }
                fs::write(path, w)?;
            }
            if let Some(path) = &args.fit {
                fs::write(path, serde_json::to_string_pretty(&analysis)?)?;
            }
            eprintln!(
                "{} intervals; alpha = {:.3}, boundary = {:.1} days (detected: {})",
                intervals.len(),
                analysis.fit.alpha,
                analysis.boundary_days,
                analysis.boundary_detected
            );
        }
        Err(e) => eprintln!("{} intervals; interevent fit unavailable: {e}", intervals.len()),
    }
    Ok(())
}

fn cmd_features(args: FeaturesArgs) -> Result<()> {
    let corpus = read_corpus(&args.corpus)?;
    let intervals: Vec<LabeledInterval> = read_jsonl(&args.intervals)?;
    let mode = match args.baseline {
        BaselineArg::Causal => BaselineMode::Causal,
        BaselineArg::Global => BaselineMode::Global,
    };
    let features = churn::extract_features(&corpus, &intervals, args.lookback, mode)?;
    write_jsonl(&args.out, &features)?;
    Ok(())
}

fn default_theta(mode: PredictorMode) -> f64 {
    match mode {
        PredictorMode::Absolute => churn::DEFAULT_THETA_ABSOLUTE,
        PredictorMode::Deviation => churn::DEFAULT_THETA_DEVIATION,
    }
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let features: Vec<FeatureVector> = read_jsonl(&args.features)?;
    let mode = PredictorMode::from(args.mode);
    let theta = args.theta.unwrap_or_else(|| default_theta(mode));
    let model = churn::fit(&features, mode, theta, args.bandwidth, args.bins, args.lookback)?;
    fs::write(&args.out, serde_json::to_string_pretty(&model)?)?;
    eprintln!(
        "fitted on {} features, prior INA = {:.4}",
        features.len(),
        model.posterior.prior_ina
    );
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let features: Vec<FeatureVector> = read_jsonl(&args.features)?;
    let mode = PredictorMode::from(args.mode);
    let theta = args.theta.unwrap_or_else(|| default_theta(mode));
    let labels = churn::predict(&features, mode, theta)?;
    let rows: Vec<PredRow> = features
        .iter()
        .zip(&labels)
        .map(|(f, &label)| PredRow {
            author: f.author.clone(),
            start_ts: f.start_ts,
            label,
        })
        .collect();
    write_jsonl(&args.out, &rows)?;
    Ok(())
}

/// Truth rows may come from intervals.jsonl or features.jsonl; both carry
/// (author, start_ts, label).
fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let preds: Vec<PredRow> = read_jsonl(&args.preds)?;
    let truth: Vec<PredRow> = read_jsonl(&args.truth)?;
    if preds.len() != truth.len() {
        bail!(
            "predictions ({}) and truth ({}) differ in length",
            preds.len(),
            truth.len()
        );
    }
    let key = |r: &PredRow| (r.author.clone(), r.start_ts);
    let mut preds_sorted = preds;
    let mut truth_sorted = truth;
    preds_sorted.sort_by_key(key);
    truth_sorted.sort_by_key(key);
    for (p, t) in preds_sorted.iter().zip(&truth_sorted) {
        if p.author != t.author || p.start_ts != t.start_ts {
            bail!(
                "prediction/truth mismatch at ({}, {}) vs ({}, {})",
                p.author, p.start_ts, t.author, t.start_ts
            );
        }
    }
    let predicted: Vec<_> = preds_sorted.iter().map(|r| r.label).collect();
    let actual: Vec<_> = truth_sorted.iter().map(|r| r.label).collect();
    let report = churn::evaluate(&predicted, &actual, args.reps, args.seed)?;
    fs::write(&args.out, serde_json::to_string_pretty(&report)?)?;
    for (name, class) in [("ACT", &report.act), ("INA", &report.ina)] {
        println!(
            "{name}: prior {:.3}, precision {:.3} +- {:.3}, recall {:.3} +- {:.3}",
            class.prior,
            class.precision_mean,
            class.precision_std,
            class.recall_mean,
            class.recall_std
        );
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let features: Vec<FeatureVector> = read_jsonl(&args.features)?;
    let truth: Vec<_> = features.iter().map(|f| f.label).collect();
    let identity: Vec<usize> = (0..features.len()).collect();
    let mode = PredictorMode::from(args.mode);
    if args.steps < 2 {
        bail!("need at least 2 sweep steps");
    }
    let mut out = String::from("theta,act_precision,act_recall,ina_precision,ina_recall\n");
    for i in 0..args.steps {
        let theta = args.lo + (args.hi - args.lo) * i as f64 / (args.steps - 1) as f64;
        let predicted = churn::predict(&features, mode, theta)?;
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        let (act_p, act_r) = churn::class_metrics_on(
            &predicted,
            &truth,
            &identity,
            activity::IntervalLabel::Act,
        );
        let (ina_p, ina_r) = churn::class_metrics_on(
            &predicted,
            &truth,
            &identity,
            activity::IntervalLabel::Ina,
        );
        out.push_str(&format!(
            "{theta:.4},{},{},{},{}\n",
            fmt(act_p),
            fmt(act_r),
            fmt(ina_p),
            fmt(ina_r)
        ));
    }
    fs::write(&args.out, out)?;
    Ok(())
}

fn cmd_watch(args: WatchArgs) -> Result<()> {
    let model: churn::ChurnModel = serde_json::from_str(
        &fs::read_to_string(&args.model)
            .with_context(|| format!("reading {}", args.model.display()))?,
    )?;
    let state = match &args.state {
        Some(path) if path.exists() => serde_json::from_str(&fs::read_to_string(path)?)?,
        _ => churn::StreamState::default(),
    };
    let mut predictor = StreamPredictor::with_state(model, state);
    let events: Vec<corpus::Message> = read_jsonl(&args.input)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    let mut alerts = 0usize;
    for event in &events {
        let alert = predictor.process(event)?;
        if alert.label == activity::IntervalLabel::Ina {
            alerts += 1;
        }
        serde_json::to_writer(&mut out, &alert)?;
        out.write_all(b"\n")?;
    }
    drop(out);
    if let Some(path) = &args.state {
        fs::write(path, serde_json::to_string(predictor.state())?)?;
    }
    eprintln!("{} events, {alerts} inactivity alerts", events.len());
    Ok(())
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    match args.primitive {
        StatsPrimitive::OneProp {
            successes,
            trials,
            p0,
            alt,
        } => print_json(&stats::one_proportion_test(successes, trials, p0, alt.into())?),
        StatsPrimitive::TwoProp { k1, n1, k2, n2, alt } => {
            print_json(&stats::two_proportion_test(k1, n1, k2, n2, alt.into())?)
        }
        StatsPrimitive::Wilcoxon { a, b } => {
            let a = read_samples(&a)?;
            let b = read_samples(&b)?;
            print_json(&stats::wilcoxon_rank_sum(&a, &b)?)
        }
        StatsPrimitive::Kde {
            samples,
            bandwidth,
            lo,
            hi,
            step,
        } => {
            let samples = read_samples(&samples)?;
            print_json(&stats::gaussian_kde(
                &samples,
                bandwidth,
                GridSpec::new(lo, hi, step)?,
            )?)
        }
        StatsPrimitive::Powerlaw {
            samples,
            xmin,
            min_count,
        } => {
            let samples = read_samples(&samples)?;
            let fit = match min_count {
                Some(m) => stats::powerlaw_mle_with_min(&samples, xmin, m)?,
                None => stats::powerlaw_mle(&samples, xmin)?,
            };
            print_json(&fit)
        }
        StatsPrimitive::LogHist {
            samples,
            bins_per_decade,
        } => {
            let samples = read_samples(&samples)?;
            print_json(&stats::log_binned_histogram(&samples, bins_per_decade)?)
        }
        StatsPrimitive::Bootstrap { samples, reps, seed } => {
            let samples = read_samples(&samples)?;
            let metric = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
            let (mean, std) = stats::bootstrap_metric(&samples, metric, reps, seed)?;
            print_json(&serde_json::json!({ "mean": mean, "std": std }))
        }
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            PipelineConfig::from_toml(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = Some(jobs);
    }
    if let Some(dir) = args.lexicon_dir {
        config.lexicon_dir = Some(dir);
    }
    let manifest = pipeline::run_pipeline(&config, &args.inputs, &args.out_dir)?;
    for artifact in &manifest.artifacts {
        println!("{:<12} {:<16} {}", artifact.stage, artifact.file, artifact.sha256);
    }
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let (_, text) = pipeline::emit_report(&args.bundle)?;
    println!("{text}");
    Ok(())
}
