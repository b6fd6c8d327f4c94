//! Per-interval emotion features, conditional distributions, the binned
//! inactivity posterior, threshold predictors and the bootstrap
//! precision/recall evaluation.

use crate::activity::{IntervalLabel, LabeledInterval};
use crate::corpus::{Corpus, Message, SECONDS_PER_DAY};
use crate::stats::{self, Density, GridSpec, StatsError, TestResult};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use thiserror::Error;

pub const DEFAULT_LOOKBACK_DAYS: u32 = 5;
pub const DEFAULT_BANDWIDTH: f64 = 0.35;
pub const DEFAULT_BINS: usize = 5;
/// Threshold on absolute strengths (bug-tracker predictor).
pub const DEFAULT_THETA_ABSOLUTE: f64 = 1.9;
/// Threshold on deviations from the contributor mean (mailing-list predictor).
pub const DEFAULT_THETA_DEVIATION: f64 = 0.8;
pub const DEFAULT_BOOTSTRAP_REPS: u32 = 20;

#[derive(Error, Debug)]
pub enum ChurnError {
    #[error("message {0:?} is not scored")]
    UnscoredMessage(String),
    #[error("interval for unknown author {0:?}")]
    UnknownAuthor(String),
    #[error("no {label} instances: conditional density undefined")]
    EmptyLabel { label: IntervalLabel },
    #[error("no features: model undefined")]
    NoFeatures,
    #[error("deviation mode requires contributor baselines")]
    MissingBaselines,
    #[error("predicted and truth lengths differ ({predicted} vs {truth})")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("out-of-order event for {author:?}: {ts} after {last_ts}")]
    OutOfOrder { author: String, ts: i64, last_ts: i64 },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Which contributor baseline enters the deviation predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    /// Running mean over the author's messages up to the interval start.
    Causal,
    /// Mean over the author's whole history.
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorMode {
    Absolute,
    Deviation,
}

/// Emotion features of one labeled interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub author: String,
    pub start_ts: i64,
    pub gap_days: f64,
    pub label: IntervalLabel,
    /// Mean positivity over the lookback window, in [1, 5].
    pub p_u: f64,
    /// Mean negativity over the lookback window, in [-5, -1].
    pub n_u: f64,
    /// Contributor mean positivity, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_p: Option<f64>,
    /// Contributor mean negativity, when available.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_n: Option<f64>,
}

/// Compute features for labeled intervals over a scored corpus.
///
/// The lookback window is `[start - lookback_days, start]`, inclusive on
/// both ends; it always contains the interval's starting message.
pub fn extract_features(
    corpus: &Corpus,
    intervals: &[LabeledInterval],
    lookback_days: u32,
    baseline_mode: BaselineMode,
) -> Result<Vec<FeatureVector>, ChurnError> {
    // Per author: (ts, p, n) in timestamp order, plus prefix sums.
    let mut by_author: BTreeMap<&str, Vec<(i64, i32, i32)>> = BTreeMap::new();
    for m in corpus.messages() {
        let score = m
            .score
            .ok_or_else(|| ChurnError::UnscoredMessage(m.id.clone()))?;
        by_author
            .entry(&m.author)
            .or_default()
            .push((m.ts, score.p(), score.n()));
    }
    let lookback_secs = lookback_days as i64 * SECONDS_PER_DAY;
    let mut features = Vec::with_capacity(intervals.len());
    for interval in intervals {
        let msgs = by_author
            .get(interval.author.as_str())
            .ok_or_else(|| ChurnError::UnknownAuthor(interval.author.clone()))?;
        let t = interval.start_ts;
        let hi = msgs.partition_point(|&(ts, _, _)| ts <= t);
        let lo = msgs.partition_point(|&(ts, _, _)| ts < t - lookback_secs);
        debug_assert!(hi > lo, "window always holds the starting message");
        let window = &msgs[lo..hi];
        let count = window.len() as f64;
        let p_u = window.iter().map(|&(_, p, _)| p as f64).sum::<f64>() / count;
        let n_u = window.iter().map(|&(_, _, n)| n as f64).sum::<f64>() / count;
        let history = match baseline_mode {
            BaselineMode::Causal => &msgs[..hi],
            BaselineMode::Global => &msgs[..],
        };
        let hist_count = history.len() as f64;
        let baseline_p = history.iter().map(|&(_, p, _)| p as f64).sum::<f64>() / hist_count;
        let baseline_n = history.iter().map(|&(_, _, n)| n as f64).sum::<f64>() / hist_count;
        features.push(FeatureVector {
            author: interval.author.clone(),
            start_ts: t,
            gap_days: interval.gap_days,
            label: interval.label,
            p_u,
            n_u,
            baseline_p: Some(baseline_p),
            baseline_n: Some(baseline_n),
        });
    }
    Ok(features)
}

/// The four conditional feature densities of Figure-5 form.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionalDensities {
    pub p_act: Density,
    pub p_ina: Density,
    pub n_act: Density,
    pub n_ina: Density,
}

fn split_by_label(features: &[FeatureVector]) -> (Vec<&FeatureVector>, Vec<&FeatureVector>) {
    features
        .iter()
        .partition(|f| f.label == IntervalLabel::Act)
}

/// Gaussian-kernel conditional densities P(P_u | I) and P(N_u | I) on the
/// score domains, at the given kernel width.
pub fn conditional_densities(
    features: &[FeatureVector],
    bandwidth: f64,
) -> Result<ConditionalDensities, ChurnError> {
    let (act, ina) = split_by_label(features);
    if act.is_empty() {
        return Err(ChurnError::EmptyLabel {
            label: IntervalLabel::Act,
        });
    }
    if ina.is_empty() {
        return Err(ChurnError::EmptyLabel {
            label: IntervalLabel::Ina,
        });
    }
    let p_grid = GridSpec::new(1.0, 5.0, 0.01).expect("static grid");
    let n_grid = GridSpec::new(-5.0, -1.0, 0.01).expect("static grid");
    let collect = |rows: &[&FeatureVector], f: fn(&FeatureVector) -> f64| -> Vec<f64> {
        rows.iter().map(|r| f(r)).collect()
    };
    Ok(ConditionalDensities {
        p_act: stats::gaussian_kde(&collect(&act, |f| f.p_u), bandwidth, p_grid)?,
        p_ina: stats::gaussian_kde(&collect(&ina, |f| f.p_u), bandwidth, p_grid)?,
        n_act: stats::gaussian_kde(&collect(&act, |f| f.n_u), bandwidth, n_grid)?,
        n_ina: stats::gaussian_kde(&collect(&ina, |f| f.n_u), bandwidth, n_grid)?,
    })
}

/// Rank-sum separation of each feature between the two labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureSeparation {
    pub p_u: TestResult,
    pub n_u: TestResult,
}

pub fn wilcoxon_conditionals(features: &[FeatureVector]) -> Result<FeatureSeparation, ChurnError> {
    let (act, ina) = split_by_label(features);
    let p = stats::wilcoxon_rank_sum(
        &act.iter().map(|f| f.p_u).collect::<Vec<_>>(),
        &ina.iter().map(|f| f.p_u).collect::<Vec<_>>(),
    )?;
    let n = stats::wilcoxon_rank_sum(
        &act.iter().map(|f| f.n_u).collect::<Vec<_>>(),
        &ina.iter().map(|f| f.n_u).collect::<Vec<_>>(),
    )?;
    Ok(FeatureSeparation { p_u: p, n_u: n })
}

/// One bin of the empirical inactivity posterior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorBin {
    /// Bin range over the feature magnitude, in [1, 5].
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub ina: u64,
    /// Empirical P(I = INA | feature in bin); 0 when unsupported.
    pub estimate: f64,
    /// 95% Wilson score interval; (0, 0) when unsupported.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub supported: bool,
}

/// Binned posterior over both features.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorTable {
    pub prior_ina: f64,
    pub p_bins: Vec<PosteriorBin>,
    pub n_bins: Vec<PosteriorBin>,
}

/// Empirical posterior P(I = INA | feature) over equal-width magnitude bins
/// spanning [1, 5]. `N_u` enters by absolute value. Each supported bin
/// carries a 95% Wilson interval; empty bins are flagged unsupported.
pub fn posterior_inactive(
    features: &[FeatureVector],
    bins: usize,
) -> Result<PosteriorTable, ChurnError> {
    if features.is_empty() {
        return Err(ChurnError::NoFeatures);
    }
    let bins = bins.max(2);
    let ina_total = features
        .iter()
        .filter(|f| f.label == IntervalLabel::Ina)
        .count();
    let prior_ina = ina_total as f64 / features.len() as f64;

    let fill = |value: fn(&FeatureVector) -> f64| -> Vec<PosteriorBin> {
        let width = 4.0 / bins as f64;
        let mut counts = vec![(0u64, 0u64); bins];
        for f in features {
            let x = value(f).clamp(1.0, 5.0);
            let idx = (((x - 1.0) / width) as usize).min(bins - 1);
            counts[idx].0 += 1;
            if f.label == IntervalLabel::Ina {
                counts[idx].1 += 1;
            }
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, (count, ina))| {
                let lo = 1.0 + i as f64 * width;
                let hi = 1.0 + (i + 1) as f64 * width;
                if count == 0 {
                    PosteriorBin {
                        lo,
                        hi,
                        count,
                        ina,
                        estimate: 0.0,
                        ci_lo: 0.0,
                        ci_hi: 0.0,
                        supported: false,
                    }
                } else {
                    let (ci_lo, ci_hi) = stats::wilson_interval(ina, count, 0.95);
                    PosteriorBin {
                        lo,
                        hi,
                        count,
                        ina,
                        estimate: ina as f64 / count as f64,
                        ci_lo,
                        ci_hi,
                        supported: true,
                    }
                }
            })
            .collect()
    };

    Ok(PosteriorTable {
        prior_ina,
        p_bins: fill(|f| f.p_u),
        n_bins: fill(|f| f.n_u.abs()),
    })
}

/// Fitted churn model: thresholds, prior, conditional densities and the
/// binned posterior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChurnModel {
    pub mode: PredictorMode,
    pub theta: f64,
    pub lookback_days: u32,
    pub bandwidth: f64,
    pub posterior: PosteriorTable,
    pub densities: ConditionalDensities,
}

/// Fit the model from features.
pub fn fit(
    features: &[FeatureVector],
    mode: PredictorMode,
    theta: f64,
    bandwidth: f64,
    bins: usize,
    lookback_days: u32,
) -> Result<ChurnModel, ChurnError> {
    let posterior = posterior_inactive(features, bins)?;
    let densities = conditional_densities(features, bandwidth)?;
    Ok(ChurnModel {
        mode,
        theta,
        lookback_days,
        bandwidth,
        posterior,
        densities,
    })
}

fn predict_one(
    f: &FeatureVector,
    mode: PredictorMode,
    theta: f64,
) -> Result<IntervalLabel, ChurnError> {
    let fire = match mode {
        PredictorMode::Absolute => f.n_u.abs() > theta || f.p_u.abs() > theta,
        PredictorMode::Deviation => {
            let (bp, bn) = match (f.baseline_p, f.baseline_n) {
                (Some(bp), Some(bn)) => (bp, bn),
                _ => return Err(ChurnError::MissingBaselines),
            };
            (f.n_u - bn).abs() > theta || (f.p_u - bp).abs() > theta
        }
    };
    Ok(if fire {
        IntervalLabel::Ina
    } else {
        IntervalLabel::Act
    })
}

/// Threshold predictor: in absolute mode an interval is predicted inactive
/// when `|N_u| > theta` or `|P_u| > theta`; in deviation mode when either
/// feature deviates from the contributor baseline by more than `theta`.
pub fn predict(
    features: &[FeatureVector],
    mode: PredictorMode,
    theta: f64,
) -> Result<Vec<IntervalLabel>, ChurnError> {
    features.iter().map(|f| predict_one(f, mode, theta)).collect()
}

/// Precision/recall of one class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassReport {
    pub prior: f64,
    pub precision_mean: f64,
    pub precision_std: f64,
    pub recall_mean: f64,
    pub recall_std: f64,
    /// Bootstrap replicates without any predicted (precision) or true
    /// (recall) instance of the class, excluded from the means.
    pub excluded_precision: u32,
    pub excluded_recall: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecisionRecallReport {
    pub reps: u32,
    pub act: ClassReport,
    pub ina: ClassReport,
}

/// Precision and recall of one class over one index sample; `None` when the
/// denominator class is absent.
pub fn class_metrics_on(
    predicted: &[IntervalLabel],
    truth: &[IntervalLabel],
    indices: &[usize],
    class: IntervalLabel,
) -> (Option<f64>, Option<f64>) {
    let (mut tp, mut fp, mut fal_n) = (0u64, 0u64, 0u64);
    for &i in indices {
        let hit = predicted[i] == class;
        let actual = truth[i] == class;
        match (hit, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fal_n += 1,
            _ => {}
        }
    }
    let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
    let recall = (tp + fal_n > 0).then(|| tp as f64 / (tp + fal_n) as f64);
    (precision, recall)
}

/// Bootstrap precision/recall per class over `reps` seeded resamples.
pub fn evaluate(
    predicted: &[IntervalLabel],
    truth: &[IntervalLabel],
    reps: u32,
    seed: u64,
) -> Result<PrecisionRecallReport, ChurnError> {
    if predicted.len() != truth.len() {
        return Err(ChurnError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(ChurnError::NoFeatures);
    }
    let reps = reps.max(1);
    let mut samples: BTreeMap<IntervalLabel, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let mut excluded: BTreeMap<IntervalLabel, (u32, u32)> = BTreeMap::new();
    for class in [IntervalLabel::Act, IntervalLabel::Ina] {
        samples.insert(class, (Vec::new(), Vec::new()));
        excluded.insert(class, (0, 0));
    }
    for rep in 0..reps {
        let indices = stats::resample_indices(predicted.len(), seed, rep);
        for class in [IntervalLabel::Act, IntervalLabel::Ina] {
            let (precision, recall) = class_metrics_on(predicted, truth, &indices, class);
            let entry = samples.get_mut(&class).unwrap();
            let skip = excluded.get_mut(&class).unwrap();
            match precision {
                Some(p) => entry.0.push(p),
                None => skip.0 += 1,
            }
            match recall {
                Some(r) => entry.1.push(r),
                None => skip.1 += 1,
            }
        }
    }
    let report_for = |class: IntervalLabel| {
        let prior =
            truth.iter().filter(|&&t| t == class).count() as f64 / truth.len() as f64;
        let (precisions, recalls) = &samples[&class];
        let (pm, ps) = if precisions.is_empty() {
            (0.0, 0.0)
        } else {
            stats::mean_and_std(precisions)
        };
        let (rm, rs) = if recalls.is_empty() {
            (0.0, 0.0)
        } else {
            stats::mean_and_std(recalls)
        };
        let (ep, er) = excluded[&class];
        ClassReport {
            prior,
            precision_mean: pm,
            precision_std: ps,
            recall_mean: rm,
            recall_std: rs,
            excluded_precision: ep,
            excluded_recall: er,
        }
    };
    Ok(PrecisionRecallReport {
        reps,
        act: report_for(IntervalLabel::Act),
        ina: report_for(IntervalLabel::Ina),
    })
}

/// A real-time risk alert for one message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskAlert {
    pub author: String,
    pub ts: i64,
    pub p_u: f64,
    pub n_u: f64,
    pub label: IntervalLabel,
    /// Largest supported posterior-bin estimate the features fall into.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub risk: Option<f64>,
}

/// Per-contributor rolling state. Only integer sums are kept, so a
/// save/restore round trip is exact.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamState {
    authors: BTreeMap<String, AuthorState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AuthorState {
    /// Messages inside the lookback window: (ts, p, n).
    window: VecDeque<(i64, i32, i32)>,
    hist_count: u64,
    hist_sum_p: i64,
    hist_sum_n: i64,
    last_ts: i64,
}

/// Streaming predictor maintaining rolling lookback features and causal
/// baselines per contributor.
#[derive(Debug, Clone)]
pub struct StreamPredictor {
    model: ChurnModel,
    state: StreamState,
}

impl StreamPredictor {
    pub fn new(model: ChurnModel) -> Self {
        StreamPredictor {
            model,
            state: StreamState::default(),
        }
    }

    pub fn with_state(model: ChurnModel, state: StreamState) -> Self {
        StreamPredictor { model, state }
    }

    pub fn state(&self) -> &StreamState {
        &self.state
    }

    pub fn model(&self) -> &ChurnModel {
        &self.model
    }

    /// Process one scored message and emit its risk alert. Events for one
    /// contributor must arrive in non-decreasing timestamp order.
    pub fn process(&mut self, message: &Message) -> Result<RiskAlert, ChurnError> {
        let score = message
            .score
            .ok_or_else(|| ChurnError::UnscoredMessage(message.id.clone()))?;
        let lookback_secs = self.model.lookback_days as i64 * SECONDS_PER_DAY;
        let state = self
            .state
            .authors
            .entry(message.author.clone())
            .or_insert_with(|| AuthorState {
                window: VecDeque::new(),
                hist_count: 0,
                hist_sum_p: 0,
                hist_sum_n: 0,
                last_ts: i64::MIN,
            });
        if message.ts < state.last_ts {
            return Err(ChurnError::OutOfOrder {
                author: message.author.clone(),
                ts: message.ts,
                last_ts: state.last_ts,
            });
        }
        state.last_ts = message.ts;
        state.window.push_back((message.ts, score.p(), score.n()));
        while state
            .window
            .front()
            .is_some_and(|&(ts, _, _)| ts < message.ts - lookback_secs)
        {
            state.window.pop_front();
        }
        state.hist_count += 1;
        state.hist_sum_p += score.p() as i64;
        state.hist_sum_n += score.n() as i64;

        let count = state.window.len() as f64;
        let p_u = state.window.iter().map(|&(_, p, _)| p as f64).sum::<f64>() / count;
        let n_u = state.window.iter().map(|&(_, _, n)| n as f64).sum::<f64>() / count;
        let baseline_p = state.hist_sum_p as f64 / state.hist_count as f64;
        let baseline_n = state.hist_sum_n as f64 / state.hist_count as f64;

        let feature = FeatureVector {
            author: message.author.clone(),
            start_ts: message.ts,
            gap_days: 0.0,
            label: IntervalLabel::Act, // placeholder, not used by the predictor
            p_u,
            n_u,
            baseline_p: Some(baseline_p),
            baseline_n: Some(baseline_n),
        };
        let label = predict_one(&feature, self.model.mode, self.model.theta)?;
        Ok(RiskAlert {
            author: message.author.clone(),
            ts: message.ts,
            p_u,
            n_u,
            label,
            risk: self.bin_risk(p_u, n_u),
        })
    }

    fn bin_risk(&self, p_u: f64, n_u: f64) -> Option<f64> {
        let lookup = |bins: &[PosteriorBin], x: f64| -> Option<f64> {
            let x = x.clamp(1.0, 5.0);
            let width = 4.0 / bins.len() as f64;
            let idx = (((x - 1.0) / width) as usize).min(bins.len() - 1);
            bins[idx].supported.then_some(bins[idx].estimate)
        };
        let p_risk = lookup(&self.model.posterior.p_bins, p_u);
        let n_risk = lookup(&self.model.posterior.n_bins, n_u.abs());
        match (p_risk, n_risk) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (one, other) => one.or(other),
        }
    }
}
