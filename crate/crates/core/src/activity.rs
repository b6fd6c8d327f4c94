//! Interevent-time statistics per contributor and activity/inactivity
//! interval labeling.
//!
//! Human communication shows a bursty mode with power-law distributed gaps
//! and an uncorrelated mode with a fast-decaying tail; the boundary between
//! them (about 30 days here) separates active intervals from the start of
//! inactivity periods.

use crate::corpus::{Corpus, SECONDS_PER_DAY};
use crate::stats::{self, Histogram, PowerlawFit, StatsError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Gap length (days) at or above which an interval counts as inactivity.
pub const DEFAULT_INACTIVITY_DAYS: f64 = 30.0;

#[derive(Error, Debug)]
pub enum ActivityError {
    #[error("one-time contributor {0:?} has no interevent times")]
    OneTimeContributor(String),
    #[error("insufficient data: {got} usable timelines, need {need}")]
    InsufficientTimelines { got: usize, need: usize },
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Ordered event times of one contributor. Events sharing a timestamp are
/// collapsed so every interevent time is positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContributorTimeline {
    pub author: String,
    /// Strictly increasing UTC timestamps.
    pub times: Vec<i64>,
}

impl ContributorTimeline {
    pub fn new(author: impl Into<String>, mut times: Vec<i64>) -> Self {
        times.sort_unstable();
        times.dedup();
        ContributorTimeline {
            author: author.into(),
            times,
        }
    }

    /// Largest gap between consecutive events, in days.
    pub fn max_interevent_days(&self) -> Option<f64> {
        self.times
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 / SECONDS_PER_DAY as f64)
            .fold(None, |acc, g| Some(acc.map_or(g, |a: f64| a.max(g))))
    }
}

/// One timeline per author, sorted by author id.
pub fn build_timelines(corpus: &Corpus) -> Vec<ContributorTimeline> {
    let mut by_author: BTreeMap<&str, Vec<i64>> = BTreeMap::new();
    for m in corpus.messages() {
        by_author.entry(&m.author).or_default().push(m.ts);
    }
    by_author
        .into_iter()
        .map(|(author, times)| ContributorTimeline::new(author, times))
        .collect()
}

/// Consecutive gaps in days. A single-event timeline is a one-time
/// contributor and is reported as such rather than yielding an empty list.
pub fn interevent_times(timeline: &ContributorTimeline) -> Result<Vec<f64>, ActivityError> {
    if timeline.times.len() < 2 {
        return Err(ActivityError::OneTimeContributor(timeline.author.clone()));
    }
    Ok(timeline
        .times
        .windows(2)
        .map(|w| (w[1] - w[0]) as f64 / SECONDS_PER_DAY as f64)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IntervalLabel {
    Act,
    Ina,
}

impl std::fmt::Display for IntervalLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntervalLabel::Act => write!(f, "ACT"),
            IntervalLabel::Ina => write!(f, "INA"),
        }
    }
}

/// The interval following one message of a contributor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInterval {
    pub author: String,
    /// Timestamp of the message opening the interval.
    pub start_ts: i64,
    pub gap_days: f64,
    pub label: IntervalLabel,
}

/// Label every interval of a timeline: active when the gap to the next
/// event is shorter than `threshold_days`, inactivity-starting otherwise
/// (a gap of exactly the threshold is inactivity). The final event opens no
/// interval; timelines with fewer than two events yield nothing.
pub fn label_intervals(timeline: &ContributorTimeline, threshold_days: f64) -> Vec<LabeledInterval> {
    timeline
        .times
        .windows(2)
        .map(|w| {
            let gap_days = (w[1] - w[0]) as f64 / SECONDS_PER_DAY as f64;
            LabeledInterval {
                author: timeline.author.clone(),
                start_ts: w[0],
                gap_days,
                label: if gap_days < threshold_days {
                    IntervalLabel::Act
                } else {
                    IntervalLabel::Ina
                },
            }
        })
        .collect()
}

/// Labeled intervals for a whole corpus, one-time contributors discarded.
pub fn label_corpus_intervals(corpus: &Corpus, threshold_days: f64) -> Vec<LabeledInterval> {
    build_timelines(corpus)
        .iter()
        .flat_map(|t| label_intervals(t, threshold_days))
        .collect()
}

/// Distribution of maximum interevent times with a power-law fit to its
/// head and a boundary estimate between the two activity modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxIntereventAnalysis {
    pub histogram: Histogram,
    pub fit: PowerlawFit,
    /// Estimated regime boundary in days.
    pub boundary_days: f64,
    /// Whether the boundary came from the density crossing rule or fell
    /// back to the hint.
    pub boundary_detected: bool,
    pub contributors_used: usize,
}

/// Analyze the per-contributor maximum interevent times.
///
/// The power-law exponent is fit over `[xmin, boundary_hint]`; the boundary
/// estimate is the first log-bin at or past `xmin` where the empirical
/// density falls below half the fitted power-law density and stays below
/// for all later bins, falling back to `boundary_hint` when no such bin
/// exists.
pub fn max_interevent_analysis(
    timelines: &[ContributorTimeline],
    xmin: f64,
    boundary_hint: f64,
    bins_per_decade: u32,
) -> Result<MaxIntereventAnalysis, ActivityError> {
    let taus: Vec<f64> = timelines
        .iter()
        .filter_map(|t| t.max_interevent_days())
        .filter(|&g| g > 0.0)
        .collect();
    if taus.len() < 10 {
        return Err(ActivityError::InsufficientTimelines {
            got: taus.len(),
            need: 10,
        });
    }
    let histogram = stats::log_binned_histogram(&taus, bins_per_decade)?;
    let head: Vec<f64> = taus.iter().copied().filter(|&t| t <= boundary_hint).collect();
    let fit = stats::powerlaw_mle(&head, xmin)?;

    // Fitted density scaled to the head mass: f(x) = F (a-1)/xmin (x/xmin)^-a
    // where F is the fraction of samples in [xmin, boundary_hint].
    let head_fraction = taus
        .iter()
        .filter(|&&t| t >= xmin && t <= boundary_hint)
        .count() as f64
        / taus.len() as f64;
    let fitted = |x: f64| {
        head_fraction * (fit.alpha - 1.0) / xmin * (x / xmin).powf(-fit.alpha)
    };

    let centers: Vec<f64> = histogram
        .bin_edges
        .windows(2)
        .map(|e| (e[0] * e[1]).sqrt())
        .collect();
    let mut boundary = None;
    for i in 0..centers.len() {
        if centers[i] < xmin {
            continue;
        }
        let below_from_here = (i..centers.len())
            .all(|j| histogram.densities[j] < fitted(centers[j]) / 2.0);
        if below_from_here {
            boundary = Some(histogram.bin_edges[i]);
            break;
        }
    }
    Ok(MaxIntereventAnalysis {
        histogram,
        fit,
        boundary_days: boundary.unwrap_or(boundary_hint),
        boundary_detected: boundary.is_some(),
        contributors_used: taus.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Channel, Corpus, Message};
    use proptest::prelude::*;

    fn msg(author: &str, ts: i64, id: &str) -> Message {
        Message {
            id: id.into(),
            author: author.into(),
            ts,
            discussion_id: "d".into(),
            channel: Channel::BugTracker,
            text: "x".into(),
            score: None,
        }
    }

    fn days(d: f64) -> i64 {
        (d * SECONDS_PER_DAY as f64) as i64
    }

    #[test]
    fn timelines_per_author() {
        let corpus = Corpus::new(
            Channel::BugTracker,
            vec![
                msg("ann", 30, "1"),
                msg("bob", 10, "2"),
                msg("ann", 20, "3"),
                msg("ann", 40, "4"),
                msg("bob", 50, "5"),
            ],
        )
        .unwrap();
        let timelines = build_timelines(&corpus);
        assert_eq!(timelines.len(), 2);
        assert_eq!(timelines[0].author, "ann");
        assert_eq!(timelines[0].times, vec![20, 30, 40]);
        assert_eq!(timelines[1].times.len(), 2);
    }

    #[test]
    fn duplicate_timestamps_collapse() {
        let corpus = Corpus::new(
            Channel::BugTracker,
            vec![msg("ann", 10, "1"), msg("ann", 10, "2"), msg("ann", 20, "3")],
        )
        .unwrap();
        let timelines = build_timelines(&corpus);
        assert_eq!(timelines[0].times, vec![10, 20]);
    }

    #[test]
    fn empty_corpus_yields_no_timelines() {
        let corpus = Corpus::new(Channel::BugTracker, vec![]).unwrap();
        assert!(build_timelines(&corpus).is_empty());
    }

    #[test]
    fn interevent_gaps_in_days() {
        let t = ContributorTimeline::new("ann", vec![0, days(10.0), days(55.0)]);
        assert_eq!(interevent_times(&t).unwrap(), vec![10.0, 45.0]);
    }

    #[test]
    fn one_time_contributor_is_marked() {
        let t = ContributorTimeline::new("ann", vec![123]);
        assert!(matches!(
            interevent_times(&t),
            Err(ActivityError::OneTimeContributor(_))
        ));
    }

    #[test]
    fn sub_day_resolution_is_preserved() {
        let t = ContributorTimeline::new("ann", vec![0, days(0.5)]);
        assert_eq!(interevent_times(&t).unwrap(), vec![0.5]);
    }

    #[test]
    fn interval_labeling_rule() {
        let t = ContributorTimeline::new(
            "ann",
            vec![0, days(10.0), days(55.0), days(60.0)],
        );
        let intervals = label_intervals(&t, 30.0);
        assert_eq!(intervals.len(), 3); // the final message opens no interval
        assert_eq!(
            intervals
                .iter()
                .map(|i| (i.start_ts, i.gap_days, i.label))
                .collect::<Vec<_>>(),
            vec![
                (0, 10.0, IntervalLabel::Act),
                (days(10.0), 45.0, IntervalLabel::Ina),
                (days(55.0), 5.0, IntervalLabel::Act),
            ]
        );
    }

    #[test]
    fn exact_threshold_gap_is_inactive() {
        let t = ContributorTimeline::new("ann", vec![0, days(30.0)]);
        assert_eq!(label_intervals(&t, 30.0)[0].label, IntervalLabel::Ina);
    }

    #[test]
    fn all_short_gaps_are_active() {
        let t = ContributorTimeline::new("ann", vec![0, days(1.0), days(5.0), days(23.0)]);
        let intervals = label_intervals(&t, 30.0);
        assert!(intervals.iter().all(|i| i.label == IntervalLabel::Act));
    }

    #[test]
    fn degenerate_gap_distribution_surfaces_fit_error() {
        let timelines: Vec<ContributorTimeline> = (0..20)
            .map(|i| ContributorTimeline::new(format!("u{i}"), vec![0, days(5.0)]))
            .collect();
        let r = max_interevent_analysis(&timelines, 5.0, 30.0, 10);
        assert!(matches!(
            r,
            Err(ActivityError::Stats(StatsError::DivergentEstimate))
        ));
    }

    #[test]
    fn mixture_boundary_and_exponent_recovered() {
        // Head: power law alpha = 1.8 truncated below 30 days; tail: 30 days
        // plus an exponential of scale 5 days, 5% of contributors.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        let timelines: Vec<ContributorTimeline> = (0..10_000)
            .map(|i| {
                let tau = if rng.random::<f64>() < 0.95 {
                    loop {
                        let u: f64 = rng.random();
                        let x = (1.0 - u).powf(-1.0 / 0.8);
                        if x <= 30.0 {
                            break x;
                        }
                    }
                } else {
                    30.0 - 5.0 * (1.0 - rng.random::<f64>()).ln()
                };
                ContributorTimeline::new(format!("u{i}"), vec![0, days(tau).max(1)])
            })
            .collect();
        let analysis = max_interevent_analysis(&timelines, 1.0, 30.0, 10).unwrap();
        assert!(
            analysis.fit.alpha > 1.6 && analysis.fit.alpha < 2.0,
            "alpha = {}",
            analysis.fit.alpha
        );
        assert!(
            analysis.boundary_days >= 15.0 && analysis.boundary_days <= 60.0,
            "boundary = {} (detected: {})",
            analysis.boundary_days,
            analysis.boundary_detected
        );
    }

    proptest! {
        #[test]
        fn interval_count_is_events_minus_one(times in proptest::collection::btree_set(0i64..10_000_000, 2..40)) {
            let t = ContributorTimeline::new("u", times.into_iter().collect());
            prop_assert_eq!(label_intervals(&t, 30.0).len(), t.times.len() - 1);
        }

        #[test]
        fn labels_are_translation_invariant(
            times in proptest::collection::btree_set(0i64..100_000_000, 2..30),
            shift in 0i64..1_000_000_000,
        ) {
            let times: Vec<i64> = times.into_iter().collect();
            let a = ContributorTimeline::new("u", times.clone());
            let b = ContributorTimeline::new("u", times.iter().map(|t| t + shift).collect());
            let la = label_intervals(&a, 30.0);
            let lb = label_intervals(&b, 30.0);
            prop_assert_eq!(la.len(), lb.len());
            for (x, y) in la.iter().zip(&lb) {
                prop_assert_eq!(x.label, y.label);
                prop_assert!((x.gap_days - y.gap_days).abs() < 1e-12);
            }
            prop_assert_eq!(interevent_times(&a).unwrap(), interevent_times(&b).unwrap());
        }
    }
}
