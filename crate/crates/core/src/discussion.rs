//! Collective emotions of discussions: baseline polarity ratios, per
//! discussion classification against the community baseline, emotion
//! moving-average time series and cross-partition proportion comparisons.

use crate::corpus::{Corpus, Message};
use crate::sentiment::Polarity;
use crate::stats::{self, Alternative, StatsError, TestResult};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.05;
/// Smallest discussion size considered for classification.
pub const DEFAULT_MIN_MESSAGES: usize = 20;
/// Moving-average window of the emotion time series, in days.
pub const DEFAULT_WINDOW_DAYS: u32 = 30;

#[derive(Error, Debug)]
pub enum DiscussionError {
    #[error("message {0:?} is not scored")]
    UnscoredMessage(String),
    #[error("no non-discarded scored messages: baseline undefined")]
    UndefinedBaseline,
    #[error("discussion {0:?} has no usable messages")]
    EmptyDiscussion(String),
    #[error("partition side {0:?} is empty")]
    EmptyPartition(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Per-polarity message counts (discarded tracked separately).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarityCounts {
    pub positive: usize,
    pub negative: usize,
    pub neutral: usize,
    pub discarded: usize,
}

impl PolarityCounts {
    pub fn add(&mut self, polarity: Polarity) {
        match polarity {
            Polarity::Positive => self.positive += 1,
            Polarity::Negative => self.negative += 1,
            Polarity::Neutral => self.neutral += 1,
            Polarity::Discarded => self.discarded += 1,
        }
    }

    /// Messages entering ratio denominators (discarded excluded).
    pub fn total(&self) -> usize {
        self.positive + self.negative + self.neutral
    }
}

fn count_polarities<'a>(
    messages: impl Iterator<Item = &'a Message>,
) -> Result<PolarityCounts, DiscussionError> {
    let mut counts = PolarityCounts::default();
    for m in messages {
        let score = m
            .score
            .ok_or_else(|| DiscussionError::UnscoredMessage(m.id.clone()))?;
        counts.add(score.polarity());
    }
    Ok(counts)
}

/// One discussion's polarity composition. Discarded-polarity messages are
/// excluded from the counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discussion {
    pub id: String,
    pub counts: PolarityCounts,
}

impl Discussion {
    pub fn size(&self) -> usize {
        self.counts.total()
    }

    /// (P_d, N_d, U_d): ratios of positive, negative, neutral messages.
    pub fn ratios(&self) -> Result<(f64, f64, f64), DiscussionError> {
        let total = self.size();
        if total == 0 {
            return Err(DiscussionError::EmptyDiscussion(self.id.clone()));
        }
        let t = total as f64;
        Ok((
            self.counts.positive as f64 / t,
            self.counts.negative as f64 / t,
            self.counts.neutral as f64 / t,
        ))
    }

    /// Barycentric plane embedding: x = N + U/2, y = (sqrt(3)/2) U.
    pub fn ternary_xy(&self) -> Result<(f64, f64), DiscussionError> {
        let (_, n, u) = self.ratios()?;
        Ok((n + u / 2.0, 3f64.sqrt() / 2.0 * u))
    }
}

/// Group a scored corpus into discussions, sorted by id.
pub fn collect_discussions(corpus: &Corpus) -> Result<Vec<Discussion>, DiscussionError> {
    let mut by_disc: BTreeMap<&str, PolarityCounts> = BTreeMap::new();
    for m in corpus.messages() {
        let score = m
            .score
            .ok_or_else(|| DiscussionError::UnscoredMessage(m.id.clone()))?;
        by_disc.entry(&m.discussion_id).or_default().add(score.polarity());
    }
    Ok(by_disc
        .into_iter()
        .map(|(id, counts)| Discussion {
            id: id.to_string(),
            counts,
        })
        .collect())
}

/// Channel-wide polarity ratios (the community "ground state").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRatios {
    pub positive: f64,
    pub negative: f64,
    pub neutral: f64,
}

/// Ratio of positive/negative/neutral messages over the whole corpus,
/// discarded-polarity messages excluded.
pub fn compute_baseline(corpus: &Corpus) -> Result<BaselineRatios, DiscussionError> {
    let counts = count_polarities(corpus.messages().iter())?;
    let total = counts.total();
    if total == 0 {
        return Err(DiscussionError::UndefinedBaseline);
    }
    let t = total as f64;
    Ok(BaselineRatios {
        positive: counts.positive as f64 / t,
        negative: counts.negative as f64 / t,
        neutral: counts.neutral as f64 / t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionClass {
    Neutral,
    Underemotional,
    Positive,
    Negative,
    Bipolar,
    Undetermined,
}

impl std::fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EmotionClass::Neutral => "neutral",
            EmotionClass::Underemotional => "underemotional",
            EmotionClass::Positive => "positive",
            EmotionClass::Negative => "negative",
            EmotionClass::Bipolar => "bipolar",
            EmotionClass::Undetermined => "undetermined",
        };
        write!(f, "{s}")
    }
}

/// Classification of one discussion, carrying the test p-values that led to
/// the label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifiedDiscussion {
    pub id: String,
    pub size: usize,
    pub ratios: (f64, f64, f64),
    pub ternary: (f64, f64),
    pub class: EmotionClass,
    /// Two-sided p-values of the neutral, positive and negative ratio tests;
    /// the latter two only when the first test rejected downward.
    pub p_neutral: f64,
    pub p_positive: Option<f64>,
    pub p_negative: Option<f64>,
}

/// Either a classification or the reason a discussion was skipped.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum DiscussionOutcome {
    Classified(ClassifiedDiscussion),
    Skipped { id: String, size: usize, reason: String },
}

/// Classify one discussion against the baseline.
///
/// Test 1 compares the neutral ratio with the baseline: no rejection means
/// `neutral`; rejection upward means `underemotional`; rejection downward
/// triggers tests 2 and 3 on the positive and negative ratios, giving
/// `bipolar` (both above baseline), `positive`, `negative`, or
/// `undetermined` (neither).
pub fn classify_discussion(
    discussion: &Discussion,
    baseline: &BaselineRatios,
    alpha: f64,
    min_messages: usize,
) -> Result<DiscussionOutcome, DiscussionError> {
    let size = discussion.size();
    if size < min_messages {
        return Ok(DiscussionOutcome::Skipped {
            id: discussion.id.clone(),
            size,
            reason: format!("fewer than {min_messages} messages"),
        });
    }
    let ratios = discussion.ratios()?;
    let ternary = discussion.ternary_xy()?;
    let n = size as u64;

    let test_u = stats::one_proportion_test(
        discussion.counts.neutral as u64,
        n,
        baseline.neutral,
        Alternative::TwoSided,
    )?;

    let mut p_positive = None;
    let mut p_negative = None;
    let class = if test_u.p_value >= alpha {
        EmotionClass::Neutral
    } else if ratios.2 > baseline.neutral {
        EmotionClass::Underemotional
    } else {
        let test_p = stats::one_proportion_test(
            discussion.counts.positive as u64,
            n,
            baseline.positive,
            Alternative::TwoSided,
        )?;
        let test_n = stats::one_proportion_test(
            discussion.counts.negative as u64,
            n,
            baseline.negative,
            Alternative::TwoSided,
        )?;
        p_positive = Some(test_p.p_value);
        p_negative = Some(test_n.p_value);
        let pos = test_p.p_value < alpha && ratios.0 > baseline.positive;
        let neg = test_n.p_value < alpha && ratios.1 > baseline.negative;
        match (pos, neg) {
            (true, true) => EmotionClass::Bipolar,
            (true, false) => EmotionClass::Positive,
            (false, true) => EmotionClass::Negative,
            (false, false) => EmotionClass::Undetermined,
        }
    };

    Ok(DiscussionOutcome::Classified(ClassifiedDiscussion {
        id: discussion.id.clone(),
        size,
        ratios,
        ternary,
        class,
        p_neutral: test_u.p_value,
        p_positive,
        p_negative,
    }))
}

/// Classification outcomes for a whole corpus plus class frequencies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassificationTable {
    pub outcomes: Vec<DiscussionOutcome>,
    pub frequencies: BTreeMap<EmotionClass, usize>,
    pub classified: usize,
    pub skipped: usize,
}

/// Classify every discussion of a scored corpus.
pub fn classify_corpus(
    corpus: &Corpus,
    baseline: &BaselineRatios,
    alpha: f64,
    min_messages: usize,
) -> Result<ClassificationTable, DiscussionError> {
    let discussions = collect_discussions(corpus)?;
    let mut outcomes = Vec::with_capacity(discussions.len());
    let mut frequencies: BTreeMap<EmotionClass, usize> = BTreeMap::new();
    let mut classified = 0;
    let mut skipped = 0;
    for d in &discussions {
        let outcome = classify_discussion(d, baseline, alpha, min_messages)?;
        match &outcome {
            DiscussionOutcome::Classified(c) => {
                classified += 1;
                *frequencies.entry(c.class).or_insert(0) += 1;
            }
            DiscussionOutcome::Skipped { .. } => skipped += 1,
        }
        outcomes.push(outcome);
    }
    Ok(ClassificationTable {
        outcomes,
        frequencies,
        classified,
        skipped,
    })
}

/// One day of the emotion moving average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    /// Day index (UTC midnight boundaries) the window ends on.
    pub day: i64,
    /// Mean positivity, in [1, 5].
    pub p: f64,
    /// Sign-flipped mean negativity, in [1, 5].
    pub n: f64,
    /// Mean polarity, in [-1, 1].
    pub s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmotionSeries {
    pub window_days: u32,
    pub points: Vec<SeriesPoint>,
}

/// Moving averages of p, -n and s over a trailing window of `window_days`
/// calendar days (UTC), one point per day whose window holds at least one
/// non-discarded message.
pub fn emotion_timeseries(
    corpus: &Corpus,
    window_days: u32,
) -> Result<EmotionSeries, DiscussionError> {
    let window_days = window_days.max(1);
    let mut day_sums: BTreeMap<i64, (usize, f64, f64, f64)> = BTreeMap::new();
    for m in corpus.messages() {
        let score = m
            .score
            .ok_or_else(|| DiscussionError::UnscoredMessage(m.id.clone()))?;
        let Some(s) = score.polarity().scalar() else {
            continue; // discarded
        };
        let entry = day_sums.entry(m.day()).or_default();
        entry.0 += 1;
        entry.1 += score.p() as f64;
        entry.2 += -score.n() as f64;
        entry.3 += s as f64;
    }
    let mut points = Vec::new();
    if day_sums.is_empty() {
        return Ok(EmotionSeries {
            window_days,
            points,
        });
    }
    let days: Vec<(i64, (usize, f64, f64, f64))> = day_sums.into_iter().collect();
    let first = days.first().unwrap().0;
    let last = days.last().unwrap().0 + window_days as i64 - 1;
    let (mut enter, mut leave) = (0usize, 0usize);
    let mut acc = (0usize, 0.0f64, 0.0f64, 0.0f64);
    for day in first..=last {
        while enter < days.len() && days[enter].0 <= day {
            let d = days[enter].1;
            acc = (acc.0 + d.0, acc.1 + d.1, acc.2 + d.2, acc.3 + d.3);
            enter += 1;
        }
        let lo = day - window_days as i64 + 1;
        while leave < days.len() && days[leave].0 < lo {
            let d = days[leave].1;
            acc = (acc.0 - d.0, acc.1 - d.1, acc.2 - d.2, acc.3 - d.3);
            leave += 1;
        }
        if acc.0 > 0 {
            let count = acc.0 as f64;
            points.push(SeriesPoint {
                day,
                p: acc.1 / count,
                n: acc.2 / count,
                s: acc.3 / count,
            });
        }
    }
    Ok(EmotionSeries {
        window_days,
        points,
    })
}

/// How to split a corpus in two for proportion comparisons.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionRule {
    /// Messages falling in the left vs right named timestamp ranges
    /// (half-open `[start, end)` in epoch seconds).
    Periods {
        left: NamedRanges,
        right: NamedRanges,
    },
    /// Messages of discussions without the author vs discussions with them.
    AuthorPresence { author: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedRanges {
    pub name: String,
    pub ranges: Vec<(i64, i64)>,
}

impl NamedRanges {
    fn contains(&self, ts: i64) -> bool {
        self.ranges.iter().any(|&(lo, hi)| ts >= lo && ts < hi)
    }
}

/// One row of the proportion-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    /// Polarity class compared: "N", "U" or "P".
    pub polarity: String,
    pub left_name: String,
    pub right_name: String,
    pub left_count: usize,
    pub left_total: usize,
    pub right_count: usize,
    pub right_total: usize,
    pub result: TestResult,
}

/// Compare the polarity proportions of two partitions of a scored corpus.
///
/// For each polarity class the two-sided test runs first; when it rejects at
/// `alpha` the row reports the one-sided alternative in the observed
/// direction (left vs right) with its p-value, otherwise the two-sided
/// result stands.
pub fn compare_partitions(
    corpus: &Corpus,
    rule: &PartitionRule,
    alpha: f64,
) -> Result<Vec<ComparisonRow>, DiscussionError> {
    let (left_name, right_name, mut left, mut right) = match rule {
        PartitionRule::Periods { left, right } => (
            left.name.clone(),
            right.name.clone(),
            PolarityCounts::default(),
            PolarityCounts::default(),
        ),
        PartitionRule::AuthorPresence { author } => (
            format!("without {author}"),
            format!("with {author}"),
            PolarityCounts::default(),
            PolarityCounts::default(),
        ),
    };
    match rule {
        PartitionRule::Periods {
            left: lr,
            right: rr,
        } => {
            for m in corpus.messages() {
                let score = m
                    .score
                    .ok_or_else(|| DiscussionError::UnscoredMessage(m.id.clone()))?;
                if lr.contains(m.ts) {
                    left.add(score.polarity());
                } else if rr.contains(m.ts) {
                    right.add(score.polarity());
                }
            }
        }
        PartitionRule::AuthorPresence { author } => {
            let mut with_author: std::collections::HashSet<&str> =
                std::collections::HashSet::new();
            for m in corpus.messages() {
                if &m.author == author {
                    with_author.insert(&m.discussion_id);
                }
            }
            for m in corpus.messages() {
                let score = m
                    .score
                    .ok_or_else(|| DiscussionError::UnscoredMessage(m.id.clone()))?;
                if with_author.contains(m.discussion_id.as_str()) {
                    right.add(score.polarity());
                } else {
                    left.add(score.polarity());
                }
            }
        }
    }
    if left.total() == 0 {
        return Err(DiscussionError::EmptyPartition(left_name));
    }
    if right.total() == 0 {
        return Err(DiscussionError::EmptyPartition(right_name));
    }

    let rows = [
        ("N", left.negative, right.negative),
        ("U", left.neutral, right.neutral),
        ("P", left.positive, right.positive),
    ];
    let mut out = Vec::with_capacity(3);
    for (polarity, k_left, k_right) in rows {
        let n_left = left.total() as u64;
        let n_right = right.total() as u64;
        let two_sided = stats::two_proportion_test(
            k_left as u64,
            n_left,
            k_right as u64,
            n_right,
            Alternative::TwoSided,
        )?;
        let result = if two_sided.p_value < alpha {
            let p_left = k_left as f64 / n_left as f64;
            let p_right = k_right as f64 / n_right as f64;
            let alt = if p_left > p_right {
                Alternative::Greater
            } else {
                Alternative::Less
            };
            stats::two_proportion_test(k_left as u64, n_left, k_right as u64, n_right, alt)?
        } else {
            two_sided
        };
        out.push(ComparisonRow {
            polarity: polarity.to_string(),
            left_name: left_name.clone(),
            right_name: right_name.clone(),
            left_count: k_left,
            left_total: left.total(),
            right_count: k_right,
            right_total: right.total(),
            result,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Channel, Corpus, Message, SECONDS_PER_DAY};
    use crate::sentiment::SentimentScore;

    pub(crate) fn scored_message(
        id: &str,
        author: &str,
        ts: i64,
        disc: &str,
        p: i32,
        n: i32,
    ) -> Message {
        Message {
            id: id.into(),
            author: author.into(),
            ts,
            discussion_id: disc.into(),
            channel: Channel::BugTracker,
            text: String::new(),
            score: Some(SentimentScore::new(p, n).unwrap()),
        }
    }

    fn corpus_of(messages: Vec<Message>) -> Corpus {
        Corpus::new(Channel::BugTracker, messages).unwrap()
    }

    /// A discussion with the given polarity composition.
    fn discussion(pos: usize, neg: usize, neu: usize) -> Discussion {
        Discussion {
            id: "d".into(),
            counts: PolarityCounts {
                positive: pos,
                negative: neg,
                neutral: neu,
                discarded: 0,
            },
        }
    }

    const TABLE2_BUG: BaselineRatios = BaselineRatios {
        positive: 0.28,
        negative: 0.16,
        neutral: 0.56,
    };

    #[test]
    fn baseline_from_counts() {
        let corpus = corpus_of(vec![
            scored_message("1", "a", 0, "d", 3, -1),  // positive
            scored_message("2", "a", 1, "d", 1, -3),  // negative
            scored_message("3", "a", 2, "d", 1, -1),  // neutral
            scored_message("4", "a", 3, "d", 2, -2),  // neutral
        ]);
        let b = compute_baseline(&corpus).unwrap();
        assert_eq!((b.positive, b.negative, b.neutral), (0.25, 0.25, 0.5));
    }

    #[test]
    fn baseline_excludes_discarded() {
        let corpus = corpus_of(vec![
            scored_message("1", "a", 0, "d", 4, -4),
            scored_message("2", "a", 1, "d", 3, -1),
        ]);
        let b = compute_baseline(&corpus).unwrap();
        assert_eq!(b.positive, 1.0);
        let only_discarded = corpus_of(vec![scored_message("1", "a", 0, "d", 5, -5)]);
        assert!(matches!(
            compute_baseline(&only_discarded),
            Err(DiscussionError::UndefinedBaseline)
        ));
    }

    #[test]
    fn ratios_and_ternary_corners() {
        let all_pos = discussion(12, 0, 0);
        assert_eq!(all_pos.ratios().unwrap(), (1.0, 0.0, 0.0));
        assert_eq!(all_pos.ternary_xy().unwrap(), (0.0, 0.0));

        let thirds = discussion(5, 5, 5);
        let (x, y) = thirds.ternary_xy().unwrap();
        assert!((x - 0.5).abs() < 1e-12);
        assert!((y - 3f64.sqrt() / 6.0).abs() < 1e-12);

        let mixed = discussion(3, 1, 4);
        assert_eq!(mixed.ratios().unwrap(), (0.375, 0.125, 0.5));
    }

    #[test]
    fn empty_discussion_has_no_ratios() {
        assert!(matches!(
            discussion(0, 0, 0).ratios(),
            Err(DiscussionError::EmptyDiscussion(_))
        ));
    }

    #[test]
    fn baseline_composition_is_neutral_class() {
        // 25 discussions x 100 messages at exactly the baseline composition.
        let d = discussion(28, 16, 56);
        let outcome = classify_discussion(&d, &TABLE2_BUG, 0.05, 20).unwrap();
        match outcome {
            DiscussionOutcome::Classified(c) => {
                assert_eq!(c.class, EmotionClass::Neutral);
                assert!(c.p_neutral > 0.9);
            }
            _ => panic!("should classify"),
        }
    }

    #[test]
    fn all_positive_discussion_is_positive() {
        let d = discussion(30, 0, 0);
        match classify_discussion(&d, &TABLE2_BUG, 0.05, 20).unwrap() {
            DiscussionOutcome::Classified(c) => assert_eq!(c.class, EmotionClass::Positive),
            _ => panic!("should classify"),
        }
    }

    #[test]
    fn polarized_discussion_is_bipolar() {
        let d = discussion(20, 20, 0);
        match classify_discussion(&d, &TABLE2_BUG, 0.05, 20).unwrap() {
            DiscussionOutcome::Classified(c) => assert_eq!(c.class, EmotionClass::Bipolar),
            _ => panic!("should classify"),
        }
    }

    #[test]
    fn small_discussion_is_skipped_with_reason() {
        let d = discussion(3, 3, 3);
        match classify_discussion(&d, &TABLE2_BUG, 0.05, 20).unwrap() {
            DiscussionOutcome::Skipped { size, reason, .. } => {
                assert_eq!(size, 9);
                assert!(reason.contains("20"));
            }
            _ => panic!("should skip"),
        }
    }

    #[test]
    fn mostly_neutral_discussion_is_underemotional() {
        let d = discussion(2, 1, 97);
        match classify_discussion(&d, &TABLE2_BUG, 0.05, 20).unwrap() {
            DiscussionOutcome::Classified(c) => {
                assert_eq!(c.class, EmotionClass::Underemotional)
            }
            _ => panic!("should classify"),
        }
    }

    #[test]
    fn positive_to_neutral_swap_never_turns_positive_label_neutral() {
        // Holding the size fixed, moving a neutral message to positive must
        // not demote a positive discussion to neutral.
        let size = 40;
        for pos in 0..=size {
            for neg in 0..=(size - pos) {
                let neu = size - pos - neg;
                let before = classify_discussion(&discussion(pos, neg, neu), &TABLE2_BUG, 0.05, 20)
                    .unwrap();
                if neu == 0 {
                    continue;
                }
                let after =
                    classify_discussion(&discussion(pos + 1, neg, neu - 1), &TABLE2_BUG, 0.05, 20)
                        .unwrap();
                if let (
                    DiscussionOutcome::Classified(b),
                    DiscussionOutcome::Classified(a),
                ) = (&before, &after)
                {
                    if b.class == EmotionClass::Positive {
                        assert_ne!(
                            a.class,
                            EmotionClass::Neutral,
                            "positive ({pos},{neg},{neu}) became neutral after swap"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn classification_ignores_message_order() {
        let mut messages = vec![
            scored_message("1", "a", 5, "d", 3, -1),
            scored_message("2", "b", 3, "d", 1, -3),
            scored_message("3", "c", 9, "d", 1, -1),
            scored_message("4", "d", 1, "d", 2, -1),
        ];
        let forward = collect_discussions(&corpus_of(messages.clone())).unwrap();
        messages.reverse();
        let backward = collect_discussions(&corpus_of(messages)).unwrap();
        assert_eq!(forward, backward);
    }

    #[test]
    fn classify_corpus_counts_and_skips() {
        let mut messages = Vec::new();
        for i in 0..30 {
            messages.push(scored_message(&format!("p{i}"), "a", i, "big", 3, -1));
        }
        messages.push(scored_message("t", "a", 50, "tiny", 3, -1));
        let corpus = corpus_of(messages);
        let table = classify_corpus(&corpus, &TABLE2_BUG, 0.05, 20).unwrap();
        assert_eq!(table.classified, 1);
        assert_eq!(table.skipped, 1);
        assert_eq!(table.frequencies[&EmotionClass::Positive], 1);
    }

    #[test]
    fn classify_corpus_all_below_cutoff() {
        let corpus = corpus_of(vec![scored_message("1", "a", 0, "d", 3, -1)]);
        let table = classify_corpus(&corpus, &TABLE2_BUG, 0.05, 20).unwrap();
        assert_eq!(table.classified, 0);
        assert_eq!(table.skipped, 1);
        assert!(table.frequencies.is_empty());
    }

    #[test]
    fn series_single_message_covers_window() {
        let corpus = corpus_of(vec![scored_message("1", "a", 0, "d", 3, -2)]);
        let series = emotion_timeseries(&corpus, 30).unwrap();
        assert_eq!(series.points.len(), 30);
        for point in &series.points {
            assert_eq!((point.p, point.n, point.s), (3.0, 2.0, 1.0));
        }
    }

    #[test]
    fn series_balanced_window_has_zero_polarity() {
        let corpus = corpus_of(vec![
            scored_message("1", "a", 0, "d", 3, -1),
            scored_message("2", "a", 100, "d", 1, -3),
        ]);
        let series = emotion_timeseries(&corpus, 30).unwrap();
        assert!(series.points.iter().all(|p| p.s == 0.0));
    }

    #[test]
    fn series_skips_discarded_messages() {
        let corpus = corpus_of(vec![
            scored_message("1", "a", 0, "d", 4, -4),
            scored_message("2", "a", 100, "d", 2, -1),
        ]);
        let series = emotion_timeseries(&corpus, 7).unwrap();
        assert!(series.points.iter().all(|p| p.p == 2.0));
    }

    #[test]
    fn series_stationary_stream_concentrates_on_mean() {
        // 200 messages/day with E[p] = 2.2; every full window within 0.05.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let probs = [0.4, 0.25, 0.15, 0.15, 0.05];
        let mut messages = Vec::new();
        let days = 120i64;
        for day in 0..days {
            for k in 0..200 {
                let draw: f64 = rng.random();
                let mut p = 5;
                let mut acc = 0.0;
                for (i, &q) in probs.iter().enumerate() {
                    acc += q;
                    if draw < acc {
                        p = i as i32 + 1;
                        break;
                    }
                }
                messages.push(scored_message(
                    &format!("m{day}-{k}"),
                    "a",
                    day * SECONDS_PER_DAY + k * 400,
                    "d",
                    p,
                    -1,
                ));
            }
        }
        let corpus = corpus_of(messages);
        let series = emotion_timeseries(&corpus, 30).unwrap();
        for point in series.points.iter().filter(|pt| pt.day >= 29 && pt.day < days) {
            assert!(
                (point.p - 2.2).abs() <= 0.05,
                "day {} mean {}",
                point.day,
                point.p
            );
        }
    }

    #[test]
    fn series_concatenates_over_large_gaps() {
        let early: Vec<Message> = (0..25)
            .map(|i| scored_message(&format!("a{i}"), "a", i * SECONDS_PER_DAY, "d", 3, -1))
            .collect();
        let late: Vec<Message> = (0..25)
            .map(|i| {
                scored_message(
                    &format!("b{i}"),
                    "a",
                    (200 + i) * SECONDS_PER_DAY,
                    "d",
                    1,
                    -3,
                )
            })
            .collect();
        let mut combined = early.clone();
        combined.extend(late.clone());
        let series_a = emotion_timeseries(&corpus_of(early), 30).unwrap();
        let series_b = emotion_timeseries(&corpus_of(late), 30).unwrap();
        let series_ab = emotion_timeseries(&corpus_of(combined), 30).unwrap();
        let mut expected = series_a.points;
        expected.extend(series_b.points);
        assert_eq!(series_ab.points, expected);
    }

    #[test]
    fn identical_partitions_compare_equal() {
        let mut messages = Vec::new();
        for i in 0..200i64 {
            let (p, n) = match i % 4 {
                0 => (3, -1),
                1 => (1, -3),
                _ => (1, -1),
            };
            // Same composition in [0, 100d) and [100d, 200d).
            messages.push(scored_message(&format!("m{i}"), "a", i % 100 * SECONDS_PER_DAY + (i / 100) * 100 * SECONDS_PER_DAY, "d", p, n));
        }
        let corpus = corpus_of(messages);
        let rule = PartitionRule::Periods {
            left: NamedRanges {
                name: "P1".into(),
                ranges: vec![(0, 100 * SECONDS_PER_DAY)],
            },
            right: NamedRanges {
                name: "P2".into(),
                ranges: vec![(100 * SECONDS_PER_DAY, 200 * SECONDS_PER_DAY)],
            },
        };
        let rows = compare_partitions(&corpus, &rule, 0.05).unwrap();
        assert_eq!(rows.len(), 3);
        for row in rows {
            assert_eq!(row.result.estimate, 0.0);
            assert!(row.result.p_value > 0.99);
            assert_eq!(row.result.alternative, Alternative::TwoSided);
        }
    }

    #[test]
    fn planted_shift_is_detected_with_direction() {
        // Right period has 5 points more negativity; n = 10^4 per side.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(19);
        let mut messages = Vec::new();
        for i in 0..20_000i64 {
            let left = i < 10_000;
            let p_neg = if left { 0.20 } else { 0.25 };
            let (p, n) = if rng.random::<f64>() < p_neg {
                (1, -3)
            } else {
                (1, -1)
            };
            let ts = if left { i } else { 100 * SECONDS_PER_DAY + i };
            messages.push(scored_message(&format!("m{i}"), "a", ts, "d", p, n));
        }
        let corpus = corpus_of(messages);
        let rule = PartitionRule::Periods {
            left: NamedRanges {
                name: "P1".into(),
                ranges: vec![(0, 50 * SECONDS_PER_DAY)],
            },
            right: NamedRanges {
                name: "P2".into(),
                ranges: vec![(100 * SECONDS_PER_DAY, 200 * SECONDS_PER_DAY)],
            },
        };
        let rows = compare_partitions(&corpus, &rule, 0.05).unwrap();
        let n_row = &rows[0];
        assert_eq!(n_row.polarity, "N");
        assert!(n_row.result.p_value < 0.05);
        assert_eq!(n_row.result.alternative, Alternative::Less);
        assert!((n_row.result.estimate - 0.05).abs() < 0.015);
    }

    #[test]
    fn author_presence_partition() {
        let mut messages = Vec::new();
        // Discussions with "alice" lean negative, the rest lean positive.
        for i in 0..400i64 {
            let with_alice = i % 2 == 0;
            let disc = format!("d{}", i % 40);
            let author = if with_alice && i % 40 < 20 { "alice" } else { "other" };
            let in_alice_disc = i % 40 < 20;
            let (p, n) = if in_alice_disc { (1, -3) } else { (3, -1) };
            messages.push(scored_message(&format!("m{i}"), author, i, &disc, p, n));
        }
        let corpus = corpus_of(messages);
        let rule = PartitionRule::AuthorPresence {
            author: "alice".into(),
        };
        let rows = compare_partitions(&corpus, &rule, 0.05).unwrap();
        assert!(rows[0].left_name.contains("without"));
        // Negativity is higher with alice: left ("without") < right ("with").
        assert_eq!(rows[0].result.alternative, Alternative::Less);
        assert!(rows[0].result.p_value < 1e-6);
    }

    #[test]
    fn empty_partition_side_is_an_error() {
        let corpus = corpus_of(vec![scored_message("1", "a", 0, "d", 3, -1)]);
        let rule = PartitionRule::Periods {
            left: NamedRanges {
                name: "P1".into(),
                ranges: vec![(0, 10)],
            },
            right: NamedRanges {
                name: "P2".into(),
                ranges: vec![(10, 20)],
            },
        };
        assert!(matches!(
            compare_partitions(&corpus, &rule, 0.05),
            Err(DiscussionError::EmptyPartition(_))
        ));
    }
}
