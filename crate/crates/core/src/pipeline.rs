//! End-to-end pipeline: ingest, score, classify, timeseries, activity,
//! features, fit, report. Every stage writes one artifact; the manifest
//! lists them with content hashes so identical inputs and configuration
//! reproduce identical bundles.

use crate::activity::{self, IntervalLabel};
use crate::churn::{self, BaselineMode, PredictorMode, PrecisionRecallReport};
use crate::corpus::{
    self, bugzilla::BugzillaFormat, Channel, Corpus, Message, SummaryStats,
};
use crate::discussion::{
    self, BaselineRatios, ClassificationTable, ComparisonRow, DiscussionOutcome, EmotionClass,
    EmotionSeries, NamedRanges, PartitionRule,
};
use crate::sentiment::{self, Lexicon};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum PipelineError {
    #[error("input error: {0}")]
    Input(String),
    #[error("stage {stage} failed: {reason}")]
    Stage { stage: &'static str, reason: String },
    #[error("incomplete bundle, missing artifacts: {0:?}")]
    IncompleteBundle(Vec<String>),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Process exit code: 2 for input errors, 3 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input(_) | PipelineError::IncompleteBundle(_) => 2,
            _ => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IngestFormat {
    BugzillaJson,
    BugzillaXml,
    Mbox,
    /// Already-normalized JSONL corpus.
    CorpusJsonl,
}

/// Timestamp ranges given as dates; parsed into [`NamedRanges`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodSpec {
    pub name: String,
    /// Inclusive start and exclusive end dates, `YYYY-MM-DD`.
    pub ranges: Vec<(String, String)>,
}

impl PeriodSpec {
    pub fn resolve(&self) -> Result<NamedRanges, PipelineError> {
        let mut ranges = Vec::new();
        for (start, end) in &self.ranges {
            ranges.push((parse_date(start)?, parse_date(end)?));
        }
        Ok(NamedRanges {
            name: self.name.clone(),
            ranges,
        })
    }
}

pub fn parse_date(s: &str) -> Result<i64, PipelineError> {
    chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map(|d| d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp())
        .map_err(|e| PipelineError::Input(format!("invalid date {s:?}: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareSpec {
    Periods { left: PeriodSpec, right: PeriodSpec },
    SplitAuthor { author: String },
}

/// Pipeline parameters. The defaults are the study's reference values:
/// 30-day moving average, 30-day inactivity threshold, 5-day lookback,
/// alpha 0.05, 5 posterior bins, kernel width 0.35, 20 bootstrap
/// replicates, thresholds 1.9 (absolute) and 0.8 (deviation).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub channel: Channel,
    pub format: IngestFormat,
    pub lexicon_dir: Option<PathBuf>,
    pub include_subject: bool,
    pub theta1: f64,
    pub theta2: f64,
    /// Predictor mode; defaults to absolute for the bug tracker and
    /// deviation for the mailing list.
    pub predictor_mode: Option<PredictorMode>,
    pub moving_average_days: u32,
    pub inactivity_days: f64,
    pub lookback_days: u32,
    pub alpha: f64,
    pub bins: usize,
    pub bandwidth: f64,
    pub bootstrap_reps: u32,
    pub seed: u64,
    pub min_messages: usize,
    pub baseline_mode: BaselineMode,
    pub xmin_days: f64,
    pub bins_per_decade: u32,
    pub compare: Option<CompareSpec>,
    pub jobs: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            channel: Channel::BugTracker,
            format: IngestFormat::CorpusJsonl,
            lexicon_dir: None,
            include_subject: false,
            theta1: churn::DEFAULT_THETA_ABSOLUTE,
            theta2: churn::DEFAULT_THETA_DEVIATION,
            predictor_mode: None,
            moving_average_days: discussion::DEFAULT_WINDOW_DAYS,
            inactivity_days: activity::DEFAULT_INACTIVITY_DAYS,
            lookback_days: churn::DEFAULT_LOOKBACK_DAYS,
            alpha: discussion::DEFAULT_ALPHA,
            bins: churn::DEFAULT_BINS,
            bandwidth: churn::DEFAULT_BANDWIDTH,
            bootstrap_reps: churn::DEFAULT_BOOTSTRAP_REPS,
            seed: 7,
            min_messages: discussion::DEFAULT_MIN_MESSAGES,
            baseline_mode: BaselineMode::Causal,
            xmin_days: 1.0,
            bins_per_decade: 10,
            compare: None,
            jobs: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Input(format!("config: {e}")))
    }

    pub fn effective_mode(&self) -> PredictorMode {
        self.predictor_mode.unwrap_or(match self.channel {
            Channel::BugTracker => PredictorMode::Absolute,
            Channel::MailingList => PredictorMode::Deviation,
        })
    }

    pub fn effective_theta(&self) -> f64 {
        match self.effective_mode() {
            PredictorMode::Absolute => self.theta1,
            PredictorMode::Deviation => self.theta2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub stage: String,
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifacts: Vec<ArtifactEntry>,
    pub failed_stage: Option<String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        reason: e.to_string(),
    }
}

/// Activity section of the final report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActivitySection {
    pub contributors: usize,
    pub one_time_contributors: usize,
    pub intervals: usize,
    pub ina_prior: f64,
    pub powerlaw_alpha: Option<f64>,
    pub boundary_days: Option<f64>,
    pub fit_note: Option<String>,
}

/// Machine-readable end-of-run report; the source of every number in the
/// rendered summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportSummary {
    pub corpus: SummaryStats,
    pub baseline: BaselineRatios,
    pub discarded_messages: usize,
    pub class_frequencies: BTreeMap<EmotionClass, usize>,
    pub discussions_classified: usize,
    pub discussions_skipped: usize,
    pub comparisons: Vec<ComparisonRow>,
    pub activity: ActivitySection,
    pub prediction: PrecisionRecallReport,
}

/// The eight artifacts of a pipeline run, in stage order.
pub const ARTIFACTS: [(&str, &str); 8] = [
    ("ingest", "corpus.jsonl"),
    ("score", "scored.jsonl"),
    ("classify", "classes.csv"),
    ("timeseries", "series.csv"),
    ("activity", "intervals.jsonl"),
    ("features", "features.jsonl"),
    ("fit", "model.json"),
    ("report", "report.json"),
];

/// Run the full pipeline over the input files, writing artifacts and a
/// manifest into `out_dir`. On a stage failure the partial manifest is
/// still written.
pub fn run_pipeline(
    config: &PipelineConfig,
    inputs: &[PathBuf],
    out_dir: &Path,
) -> Result<RunManifest, PipelineError> {
    fs::create_dir_all(out_dir)?;
    let mut manifest = RunManifest {
        artifacts: Vec::new(),
        failed_stage: None,
    };
    let result = run_stages(config, inputs, out_dir, &mut manifest);
    if let Err(PipelineError::Stage { stage, .. }) = &result {
        manifest.failed_stage = Some(stage.to_string());
    }
    let manifest_json =
        serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    fs::write(out_dir.join("manifest.json"), manifest_json)?;
    result.map(|_| manifest)
}

fn record_artifact(
    manifest: &mut RunManifest,
    out_dir: &Path,
    stage: &'static str,
    file: &str,
    bytes: &[u8],
) -> Result<(), PipelineError> {
    fs::write(out_dir.join(file), bytes)?;
    manifest.artifacts.push(ArtifactEntry {
        stage: stage.to_string(),
        file: file.to_string(),
        sha256: sha256_hex(bytes),
    });
    Ok(())
}

fn run_stages(
    config: &PipelineConfig,
    inputs: &[PathBuf],
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), PipelineError> {
    // ingest
    let corpus = ingest(config, inputs).map_err(stage_err("ingest"))?;
    let mut bytes = Vec::new();
    corpus::write_corpus_jsonl(&mut bytes, &corpus).map_err(stage_err("ingest"))?;
    record_artifact(manifest, out_dir, "ingest", "corpus.jsonl", &bytes)?;

    // score
    let lexicon_dir = config.lexicon_dir.as_ref().ok_or(PipelineError::Stage {
        stage: "score",
        reason: "no lexicon directory configured".into(),
    })?;
    let lexicon = sentiment::load_lexicon_dir(lexicon_dir).map_err(stage_err("score"))?;
    let scored = score_corpus(&corpus, &lexicon, config).map_err(stage_err("score"))?;
    let mut bytes = Vec::new();
    corpus::write_corpus_jsonl(&mut bytes, &scored).map_err(stage_err("score"))?;
    record_artifact(manifest, out_dir, "score", "scored.jsonl", &bytes)?;

    // classify
    let baseline = discussion::compute_baseline(&scored).map_err(stage_err("classify"))?;
    let table =
        discussion::classify_corpus(&scored, &baseline, config.alpha, config.min_messages)
            .map_err(stage_err("classify"))?;
    let bytes = classes_csv(&table).map_err(stage_err("classify"))?;
    record_artifact(manifest, out_dir, "classify", "classes.csv", &bytes)?;

    // timeseries
    let series = discussion::emotion_timeseries(&scored, config.moving_average_days)
        .map_err(stage_err("timeseries"))?;
    let bytes = series_csv(&series).map_err(stage_err("timeseries"))?;
    record_artifact(manifest, out_dir, "timeseries", "series.csv", &bytes)?;

    // activity
    let timelines = activity::build_timelines(&scored);
    let intervals = activity::label_corpus_intervals(&scored, config.inactivity_days);
    let mut bytes = Vec::new();
    for interval in &intervals {
        serde_json::to_writer(&mut bytes, interval).map_err(stage_err("activity"))?;
        bytes.push(b'\n');
    }
    record_artifact(manifest, out_dir, "activity", "intervals.jsonl", &bytes)?;

    // features
    let features = churn::extract_features(
        &scored,
        &intervals,
        config.lookback_days,
        config.baseline_mode,
    )
    .map_err(stage_err("features"))?;
    if features.is_empty() {
        return Err(PipelineError::Stage {
            stage: "features",
            reason: "no labeled intervals (every contributor posted at most once)".into(),
        });
    }
    let mut bytes = Vec::new();
    for f in &features {
        serde_json::to_writer(&mut bytes, f).map_err(stage_err("features"))?;
        bytes.push(b'\n');
    }
    record_artifact(manifest, out_dir, "features", "features.jsonl", &bytes)?;

    // fit
    let model = churn::fit(
        &features,
        config.effective_mode(),
        config.effective_theta(),
        config.bandwidth,
        config.bins,
        config.lookback_days,
    )
    .map_err(stage_err("fit"))?;
    let bytes = serde_json::to_vec_pretty(&model).map_err(stage_err("fit"))?;
    record_artifact(manifest, out_dir, "fit", "model.json", &bytes)?;

    // report: predictions, evaluation, comparisons, activity fit.
    let predicted = churn::predict(&features, model.mode, model.theta)
        .map_err(stage_err("report"))?;
    let truth: Vec<IntervalLabel> = features.iter().map(|f| f.label).collect();
    let prediction = churn::evaluate(&predicted, &truth, config.bootstrap_reps, config.seed)
        .map_err(stage_err("report"))?;
    let comparisons = run_comparisons(config, &scored).map_err(stage_err("report"))?;
    let discarded = scored
        .messages()
        .iter()
        .filter(|m| m.score.is_some_and(|s| s.polarity().scalar().is_none()))
        .count();
    let one_time = timelines.iter().filter(|t| t.times.len() < 2).count();
    let ina = intervals
        .iter()
        .filter(|i| i.label == IntervalLabel::Ina)
        .count();
    let fit_analysis = activity::max_interevent_analysis(
        &timelines,
        config.xmin_days,
        config.inactivity_days,
        config.bins_per_decade,
    );
    let activity_section = match fit_analysis {
        Ok(a) => ActivitySection {
            contributors: timelines.len(),
            one_time_contributors: one_time,
            intervals: intervals.len(),
            ina_prior: ina as f64 / intervals.len().max(1) as f64,
            powerlaw_alpha: Some(a.fit.alpha),
            boundary_days: Some(a.boundary_days),
            fit_note: None,
        },
        Err(e) => ActivitySection {
            contributors: timelines.len(),
            one_time_contributors: one_time,
            intervals: intervals.len(),
            ina_prior: ina as f64 / intervals.len().max(1) as f64,
            powerlaw_alpha: None,
            boundary_days: None,
            fit_note: Some(e.to_string()),
        },
    };
    let report = ReportSummary {
        corpus: corpus::corpus_summary(&scored),
        baseline,
        discarded_messages: discarded,
        class_frequencies: table.frequencies.clone(),
        discussions_classified: table.classified,
        discussions_skipped: table.skipped,
        comparisons,
        activity: activity_section,
        prediction,
    };
    let bytes = serde_json::to_vec_pretty(&report).map_err(stage_err("report"))?;
    record_artifact(manifest, out_dir, "report", "report.json", &bytes)?;
    Ok(())
}

fn ingest(config: &PipelineConfig, inputs: &[PathBuf]) -> Result<Corpus, PipelineError> {
    if inputs.is_empty() {
        return Err(PipelineError::Input("no input files".into()));
    }
    let mut messages: Vec<Message> = Vec::new();
    for path in inputs {
        let bytes = fs::read(path)
            .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
        let parsed = match config.format {
            IngestFormat::BugzillaJson => {
                corpus::bugzilla::parse_bugzilla_export(&bytes, BugzillaFormat::Json)
                    .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?
                    .messages
            }
            IngestFormat::BugzillaXml => {
                corpus::bugzilla::parse_bugzilla_export(&bytes, BugzillaFormat::Xml)
                    .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?
                    .messages
            }
            IngestFormat::Mbox => corpus::mbox::parse_mbox(&bytes).messages,
            IngestFormat::CorpusJsonl => corpus::read_corpus_jsonl(BufReader::new(&bytes[..]))
                .map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?
                .messages()
                .to_vec(),
        };
        messages.extend(parsed);
    }
    Corpus::new(config.channel, messages)
        .map_err(|e| PipelineError::Input(e.to_string()))
}

/// Score every message with the lexicon, in parallel when configured.
pub fn score_corpus(
    corpus: &Corpus,
    lexicon: &Lexicon,
    config: &PipelineConfig,
) -> Result<Corpus, PipelineError> {
    use rayon::prelude::*;
    let score_one = |m: &Message| {
        let text = if config.include_subject && m.channel == Channel::MailingList {
            format!("{} {}", m.discussion_id, m.text)
        } else {
            m.text.clone()
        };
        Some(lexicon.score(&text))
    };
    let scores: Vec<_> = match config.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.max(1))
                .build()
                .map_err(|e| PipelineError::Stage {
                    stage: "score",
                    reason: e.to_string(),
                })?;
            pool.install(|| corpus.messages().par_iter().map(score_one).collect())
        }
        None => corpus.messages().par_iter().map(score_one).collect(),
    };
    corpus
        .with_scores(scores)
        .map_err(|e| PipelineError::Stage {
            stage: "score",
            reason: e.to_string(),
        })
}

fn run_comparisons(
    config: &PipelineConfig,
    scored: &Corpus,
) -> Result<Vec<ComparisonRow>, PipelineError> {
    let rule = match &config.compare {
        Some(CompareSpec::Periods { left, right }) => PartitionRule::Periods {
            left: left.resolve()?,
            right: right.resolve()?,
        },
        Some(CompareSpec::SplitAuthor { author }) => PartitionRule::AuthorPresence {
            author: author.clone(),
        },
        // Default: first vs second half of the observation window.
        None => {
            let Some((start, end)) = scored.window() else {
                return Ok(Vec::new());
            };
            let mid = start + (end - start) / 2;
            PartitionRule::Periods {
                left: NamedRanges {
                    name: "first half".into(),
                    ranges: vec![(start, mid)],
                },
                right: NamedRanges {
                    name: "second half".into(),
                    ranges: vec![(mid, end + 1)],
                },
            }
        }
    };
    discussion::compare_partitions(scored, &rule, config.alpha)
        .map_err(|e| PipelineError::Input(e.to_string()))
}

pub fn classes_csv(table: &ClassificationTable) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "disc",
        "size",
        "p_d",
        "n_d",
        "u_d",
        "ternary_x",
        "ternary_y",
        "outcome",
        "p_neutral",
        "p_positive",
        "p_negative",
    ])?;
    for outcome in &table.outcomes {
        match outcome {
            DiscussionOutcome::Classified(c) => {
                w.write_record([
                    c.id.clone(),
                    c.size.to_string(),
                    format!("{:.6}", c.ratios.0),
                    format!("{:.6}", c.ratios.1),
                    format!("{:.6}", c.ratios.2),
                    format!("{:.6}", c.ternary.0),
                    format!("{:.6}", c.ternary.1),
                    c.class.to_string(),
                    format!("{:.6e}", c.p_neutral),
                    c.p_positive.map(|p| format!("{p:.6e}")).unwrap_or_default(),
                    c.p_negative.map(|p| format!("{p:.6e}")).unwrap_or_default(),
                ])?;
            }
            DiscussionOutcome::Skipped { id, size, reason } => {
                w.write_record([
                    id.clone(),
                    size.to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("skipped: {reason}"),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

/// Ternary plot data: one row per classified discussion.
pub fn ternary_csv(table: &ClassificationTable) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["disc", "x", "y", "size", "class"])?;
    for outcome in &table.outcomes {
        if let DiscussionOutcome::Classified(c) = outcome {
            w.write_record([
                c.id.clone(),
                format!("{:.6}", c.ternary.0),
                format!("{:.6}", c.ternary.1),
                c.size.to_string(),
                c.class.to_string(),
            ])?;
        }
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn series_csv(series: &EmotionSeries) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["date", "p", "n", "s"])?;
    for point in &series.points {
        let date = chrono::DateTime::from_timestamp(point.day * corpus::SECONDS_PER_DAY, 0)
            .map(|d| d.date_naive().to_string())
            .unwrap_or_else(|| point.day.to_string());
        w.write_record([
            date,
            format!("{:.6}", point.p),
            format!("{:.6}", point.n),
            format!("{:.6}", point.s),
        ])?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "polarity",
        "left",
        "right",
        "p_value",
        "alternative",
        "estimate",
    ])?;
    for row in rows {
        w.write_record([
            row.polarity.clone(),
            row.left_name.clone(),
            row.right_name.clone(),
            format!("{:.6e}", row.result.p_value),
            row.result.alternative.to_string(),
            format!("{:.6}", row.result.estimate),
        ])?;
    }
    Ok(w.into_inner().expect("in-memory writer"))
}

/// Load the report from a bundle directory, verifying the bundle is
/// complete, and render the human-readable summary.
pub fn emit_report(out_dir: &Path) -> Result<(ReportSummary, String), PipelineError> {
    let missing: Vec<String> = ARTIFACTS
        .iter()
        .map(|(_, file)| file.to_string())
        .filter(|file| !out_dir.join(file).exists())
        .collect();
    if !missing.is_empty() {
        return Err(PipelineError::IncompleteBundle(missing));
    }
    let bytes = fs::read(out_dir.join("report.json"))?;
    let report: ReportSummary = serde_json::from_slice(&bytes)
        .map_err(|e| PipelineError::Input(format!("report.json: {e}")))?;
    let text = render_report(&report);
    Ok((report, text))
}

fn format_day(ts: i64) -> String {
    chrono::DateTime::from_timestamp(ts, 0)
        .map(|d| d.date_naive().to_string())
        .unwrap_or_else(|| ts.to_string())
}

/// Render the six report sections.
pub fn render_report(report: &ReportSummary) -> String {
    let mut out = String::new();
    let mut w = |line: String| {
        out.push_str(&line);
        out.push('\n');
    };
    w("== Corpus ==".into());
    w(format!("messages:      {}", report.corpus.message_count));
    w(format!("discussions:   {}", report.corpus.discussion_count));
    w(format!("contributors:  {}", report.corpus.contributor_count));
    match report.corpus.window {
        Some((start, end)) => w(format!(
            "window:        {} to {}",
            format_day(start),
            format_day(end)
        )),
        None => w("window:        (empty)".into()),
    }

    w("\n== Polarity ratios ==".into());
    w(format!("positive: {:.6}", report.baseline.positive));
    w(format!("negative: {:.6}", report.baseline.negative));
    w(format!("neutral:  {:.6}", report.baseline.neutral));
    w(format!("discarded messages: {}", report.discarded_messages));

    w("\n== Discussion classes ==".into());
    if report.discussions_classified == 0 {
        w("no qualifying discussions".into());
    } else {
        for (class, count) in &report.class_frequencies {
            w(format!("{class:<15} {count}"));
        }
    }
    w(format!(
        "classified: {}, skipped: {}",
        report.discussions_classified, report.discussions_skipped
    ));

    w("\n== Proportion comparisons ==".into());
    if report.comparisons.is_empty() {
        w("no comparison configured".into());
    } else {
        for row in &report.comparisons {
            w(format!(
                "{} {} {} {}: p = {:.6e}, estimate = {:.6}",
                row.polarity,
                row.left_name,
                row.result.alternative,
                row.right_name,
                row.result.p_value,
                row.result.estimate
            ));
        }
    }

    w("\n== Activity ==".into());
    w(format!("contributors:           {}", report.activity.contributors));
    w(format!(
        "one-time contributors:  {}",
        report.activity.one_time_contributors
    ));
    w(format!("labeled intervals:      {}", report.activity.intervals));
    w(format!("inactivity prior:       {:.6}", report.activity.ina_prior));
    match (report.activity.powerlaw_alpha, report.activity.boundary_days) {
        (Some(alpha), Some(boundary)) => {
            w(format!("power-law alpha:        {alpha:.6}"));
            w(format!("mode boundary (days):   {boundary:.6}"));
        }
        _ => w(format!(
            "power-law fit:          unavailable ({})",
            report.activity.fit_note.as_deref().unwrap_or("unknown")
        )),
    }

    w("\n== Prediction ==".into());
    for (name, class) in [("ACT", &report.prediction.act), ("INA", &report.prediction.ina)] {
        w(format!(
            "{name}: prior {:.6}, precision {:.6} +- {:.6}, recall {:.6} +- {:.6}",
            class.prior,
            class.precision_mean,
            class.precision_std,
            class.recall_mean,
            class.recall_std
        ));
    }
    w(format!("bootstrap replicates: {}", report.prediction.reps));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_values() {
        let config = PipelineConfig::default();
        assert_eq!(config.moving_average_days, 30);
        assert_eq!(config.inactivity_days, 30.0);
        assert_eq!(config.lookback_days, 5);
        assert_eq!(config.alpha, 0.05);
        assert_eq!(config.bins, 5);
        assert_eq!(config.bandwidth, 0.35);
        assert_eq!(config.bootstrap_reps, 20);
        assert_eq!(config.theta1, 1.9);
        assert_eq!(config.theta2, 0.8);
        assert_eq!(config.min_messages, 20);
    }

    #[test]
    fn mode_follows_channel() {
        let mut config = PipelineConfig::default();
        assert_eq!(config.effective_mode(), PredictorMode::Absolute);
        assert_eq!(config.effective_theta(), 1.9);
        config.channel = Channel::MailingList;
        assert_eq!(config.effective_mode(), PredictorMode::Deviation);
        assert_eq!(config.effective_theta(), 0.8);
        config.predictor_mode = Some(PredictorMode::Absolute);
        assert_eq!(config.effective_theta(), 1.9);
    }

    #[test]
    fn toml_round_trip_with_overrides() {
        let config = PipelineConfig::from_toml(
            r#"
channel = "ml"
format = "mbox"
alpha = 0.01
seed = 99
[compare.periods.left]
name = "P1"
ranges = [["2002-01-01", "2004-10-28"]]
[compare.periods.right]
name = "P2"
ranges = [["2004-10-28", "2008-03-30"]]
"#,
        )
        .unwrap();
        assert_eq!(config.channel, Channel::MailingList);
        assert_eq!(config.alpha, 0.01);
        assert_eq!(config.seed, 99);
        assert_eq!(config.bandwidth, 0.35); // untouched default
        match config.compare {
            Some(CompareSpec::Periods { ref left, .. }) => {
                assert_eq!(left.name, "P1");
                let resolved = left.resolve().unwrap();
                assert_eq!(resolved.ranges.len(), 1);
            }
            _ => panic!("periods expected"),
        }
    }

    #[test]
    fn date_parsing() {
        assert_eq!(parse_date("1970-01-02").unwrap(), 86_400);
        assert!(parse_date("02/01/1970").is_err());
    }
}
