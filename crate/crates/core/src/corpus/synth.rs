//! Deterministic synthetic corpus generator with planted ground truth.
//!
//! Discussions receive emission classes (polarity mixtures of their
//! messages) and contributors receive an inactivity structure: after each
//! message, the gap to the next one is long (inactivity) exactly when the
//! mean negativity over the lookback window exceeds the configured rule
//! threshold, optionally contradicted by label noise. Message text is built
//! from tokens of [`synthetic_lexicon`], so scoring the corpus reproduces
//! the planted strengths.

use super::{Channel, Corpus, CorpusError, Message, SECONDS_PER_DAY};
use crate::sentiment::{Lexicon, SentimentScore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;

/// Message emission mixture of one planted discussion class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassSpec {
    pub label: String,
    pub weight: f64,
    /// Probability of a message being positive, negative, neutral.
    pub polarity_probs: [f64; 3],
}

/// Planted inactivity structure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InactivitySpec {
    /// Gap length in days separating active from inactivity intervals.
    pub threshold_days: f64,
    /// The interval after a message is inactive iff the mean absolute
    /// negativity over the lookback window exceeds this value.
    pub rule_threshold: f64,
    /// Expected fraction of inactivity intervals; validated against the
    /// value implied by the emission mixture.
    pub target_prior: f64,
    pub lookback_days: f64,
    /// Uniform range for active gaps; must exceed the lookback so each
    /// lookback window holds exactly one message.
    pub act_gap_days: (f64, f64),
    /// Uniform range for inactivity gaps; at least `threshold_days`.
    pub ina_gap_days: (f64, f64),
    /// Probability that a gap contradicts the rule decision.
    pub label_noise: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub channel: Channel,
    pub contributors: usize,
    pub discussions: usize,
    /// Inclusive range of messages per contributor.
    pub messages_per_contributor: (usize, usize),
    pub start_ts: i64,
    /// Contributor start times spread uniformly over this many days.
    pub start_spread_days: f64,
    pub classes: Vec<ClassSpec>,
    /// P(p = 2..5) for positive-polarity messages.
    pub positive_magnitudes: [f64; 4],
    /// P(|n| = 2..5) for negative-polarity messages.
    pub negative_magnitudes: [f64; 4],
    /// Gap range in days when no inactivity structure is planted.
    pub default_gap_days: (f64, f64),
    pub inactivity: Option<InactivitySpec>,
}

impl SynthConfig {
    /// Canonical churn-planting configuration: one emission class whose
    /// negative-message probability equals the target prior, so the interval
    /// after a message is inactive exactly when that message is negative
    /// (every negative magnitude exceeds `rule_threshold`).
    pub fn activity(target_prior: f64, rule_threshold: f64) -> SynthConfig {
        SynthConfig {
            channel: Channel::BugTracker,
            contributors: 500,
            discussions: 50,
            messages_per_contributor: (2, 40),
            start_ts: 1_072_915_200, // 2004-01-01
            start_spread_days: 120.0,
            classes: vec![ClassSpec {
                label: "background".into(),
                weight: 1.0,
                polarity_probs: [0.0, target_prior, 1.0 - target_prior],
            }],
            positive_magnitudes: [0.6, 0.25, 0.1, 0.05],
            negative_magnitudes: [0.6, 0.25, 0.1, 0.05],
            default_gap_days: (0.05, 2.0),
            inactivity: Some(InactivitySpec {
                threshold_days: 30.0,
                rule_threshold,
                target_prior,
                lookback_days: 5.0,
                act_gap_days: (5.5, 29.0),
                ina_gap_days: (30.5, 120.0),
                label_noise: 0.0,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TruthLabel {
    Act,
    Ina,
}

/// Ground truth for one inter-message interval.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthInterval {
    pub author: String,
    pub start_ts: i64,
    pub gap_days: f64,
    pub label: TruthLabel,
    /// Whether the planted rule fired (differs from `label` under noise).
    pub rule_fired: bool,
    pub p_u: f64,
    pub n_u: f64,
}

/// Ground truth emitted alongside a synthetic corpus.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SynthTruth {
    pub intervals: Vec<TruthInterval>,
    pub discussion_classes: BTreeMap<String, String>,
    /// Planted probability of an inactivity label.
    pub expected_prior: Option<f64>,
}

impl SynthTruth {
    pub fn empirical_prior(&self) -> Option<f64> {
        if self.intervals.is_empty() {
            return None;
        }
        let ina = self
            .intervals
            .iter()
            .filter(|i| i.label == TruthLabel::Ina)
            .count();
        Some(ina as f64 / self.intervals.len() as f64)
    }
}

/// One JSONL line per truth record, tagged by kind.
pub fn write_truth_jsonl<W: Write>(writer: &mut W, truth: &SynthTruth) -> std::io::Result<()> {
    for class in &truth.discussion_classes {
        let row = serde_json::json!({"kind": "discussion", "disc": class.0, "class": class.1});
        serde_json::to_writer(&mut *writer, &row)?;
        writer.write_all(b"\n")?;
    }
    for interval in &truth.intervals {
        let mut row = serde_json::to_value(interval).expect("serializable interval");
        row.as_object_mut()
            .unwrap()
            .insert("kind".into(), "interval".into());
        serde_json::to_writer(&mut *writer, &row)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Lexicon whose terms reproduce the generator's planted strengths.
pub fn synthetic_lexicon() -> Lexicon {
    Lexicon::from_entries(&synthetic_lexicon_terms(), &[], &[]).expect("static entries are valid")
}

pub fn synthetic_lexicon_terms() -> Vec<(&'static str, i32)> {
    vec![
        ("tonep2", 2),
        ("tonep3", 3),
        ("tonep4", 4),
        ("tonep5", 5),
        ("tonen2", -2),
        ("tonen3", -3),
        ("tonen4", -4),
        ("tonen5", -5),
    ]
}

fn validate_probs(name: &str, probs: &[f64]) -> Result<(), CorpusError> {
    if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(CorpusError::InvalidConfig(format!(
            "{name} probabilities must lie in [0,1]"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidConfig(format!(
            "{name} probabilities sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

impl SynthConfig {
    fn validate(&self) -> Result<(), CorpusError> {
        let fail = |m: String| Err(CorpusError::InvalidConfig(m));
        if self.contributors == 0 || self.discussions == 0 {
            return fail("contributors and discussions must be positive".into());
        }
        let (lo, hi) = self.messages_per_contributor;
        if lo == 0 || lo > hi {
            return fail(format!("invalid messages_per_contributor ({lo}, {hi})"));
        }
        if self.classes.is_empty() {
            return fail("at least one class required".into());
        }
        for c in &self.classes {
            if !(c.weight > 0.0) {
                return fail(format!("class {:?} weight must be positive", c.label));
            }
            validate_probs(&format!("class {:?}", c.label), &c.polarity_probs)?;
        }
        let p_pos: f64 = self.norm_class_weights().iter().zip(&self.classes)
            .map(|(w, c)| w * c.polarity_probs[0])
            .sum();
        if p_pos > 0.0 {
            validate_probs("positive magnitude", &self.positive_magnitudes)?;
        }
        let p_neg = self.negative_probability();
        if p_neg > 0.0 {
            validate_probs("negative magnitude", &self.negative_magnitudes)?;
        }
        if let Some(spec) = &self.inactivity {
            if !(spec.target_prior > 0.0 && spec.target_prior < 1.0) {
                return fail(format!(
                    "target prior {} outside (0, 1)",
                    spec.target_prior
                ));
            }
            if !(0.0..1.0).contains(&spec.label_noise) {
                return fail(format!("label noise {} outside [0, 1)", spec.label_noise));
            }
            if !(spec.act_gap_days.0 > spec.lookback_days) {
                return fail(format!(
                    "active gaps must exceed the lookback ({} days) for exact planting",
                    spec.lookback_days
                ));
            }
            if !(spec.act_gap_days.1 < spec.threshold_days)
                || spec.act_gap_days.0 > spec.act_gap_days.1
            {
                return fail("active gap range must lie below the threshold".into());
            }
            if !(spec.ina_gap_days.0 >= spec.threshold_days)
                || spec.ina_gap_days.0 > spec.ina_gap_days.1
            {
                return fail("inactivity gap range must start at the threshold".into());
            }
            let implied = self.implied_label_prior(spec);
            if (implied - spec.target_prior).abs() > 1e-6 {
                return fail(format!(
                    "emission mixture implies a prior of {implied:.6}, target is {}",
                    spec.target_prior
                ));
            }
        }
        Ok(())
    }

    fn norm_class_weights(&self) -> Vec<f64> {
        let total: f64 = self.classes.iter().map(|c| c.weight).sum();
        self.classes.iter().map(|c| c.weight / total).collect()
    }

    fn negative_probability(&self) -> f64 {
        self.norm_class_weights()
            .iter()
            .zip(&self.classes)
            .map(|(w, c)| w * c.polarity_probs[1])
            .sum()
    }

    /// Probability that a message's interval is labeled inactive: the rule
    /// fires for negative messages with magnitude above the threshold, then
    /// noise may contradict it.
    fn implied_label_prior(&self, spec: &InactivitySpec) -> f64 {
        let k0 = (spec.rule_threshold.floor() as i64 + 1).max(2);
        let p_strong: f64 = (2..=5)
            .filter(|&m| m >= k0)
            .map(|m| self.negative_magnitudes[(m - 2) as usize])
            .sum();
        let fired = self.negative_probability() * p_strong;
        fired * (1.0 - spec.label_noise) + (1.0 - fired) * spec.label_noise
    }
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let draw: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn gap_seconds(rng: &mut ChaCha8Rng, range: (f64, f64)) -> i64 {
    let days = rng.random_range(range.0..=range.1);
    (days * SECONDS_PER_DAY as f64).round() as i64
}

/// Generate a corpus and its ground truth. Deterministic in (config, seed).
pub fn generate_synthetic_corpus(
    config: &SynthConfig,
    seed: u64,
) -> Result<(Corpus, SynthTruth), CorpusError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = config.norm_class_weights();

    let class_of_disc: Vec<usize> = (0..config.discussions)
        .map(|_| sample_index(&mut rng, &weights))
        .collect();
    let mut truth = SynthTruth {
        expected_prior: config
            .inactivity
            .as_ref()
            .map(|s| config.implied_label_prior(s)),
        ..SynthTruth::default()
    };
    for (d, &c) in class_of_disc.iter().enumerate() {
        truth
            .discussion_classes
            .insert(format!("d{d:05}"), config.classes[c].label.clone());
    }

    let threshold_secs = config
        .inactivity
        .as_ref()
        .map(|s| (s.threshold_days * SECONDS_PER_DAY as f64).round() as i64);
    let mut messages = Vec::new();
    let mut disc_counter = 0usize;
    for u in 0..config.contributors {
        let author = format!("u{u:05}");
        let (lo, hi) = config.messages_per_contributor;
        let count = rng.random_range(lo..=hi);
        let mut t = config.start_ts
            + (rng.random::<f64>() * config.start_spread_days * SECONDS_PER_DAY as f64) as i64;
        let mut history: Vec<(i64, i32, i32)> = Vec::with_capacity(count);
        for j in 0..count {
            let disc = disc_counter % config.discussions;
            disc_counter += 1;
            let class = &config.classes[class_of_disc[disc]];
            let polarity = sample_index(&mut rng, &class.polarity_probs);
            let (p, n) = match polarity {
                0 => (2 + sample_index(&mut rng, &config.positive_magnitudes) as i32, -1),
                1 => (1, -(2 + sample_index(&mut rng, &config.negative_magnitudes) as i32)),
                _ => (1, -1),
            };
            history.push((t, p, n));
            let text = match (p > 1, n < -1) {
                (true, true) => format!("update tonep{p} tonen{}", -n),
                (true, false) => format!("update tonep{p}"),
                (false, true) => format!("update tonen{}", -n),
                (false, false) => "update".to_string(),
            };
            messages.push(Message {
                id: format!("s{u:05}-{j:04}"),
                author: author.clone(),
                ts: t,
                discussion_id: format!("d{disc:05}"),
                channel: config.channel,
                text,
                score: Some(SentimentScore::new(p, n).expect("planted scores in range")),
            });

            if j + 1 == count {
                break;
            }
            match &config.inactivity {
                Some(spec) => {
                    let lookback_secs = (spec.lookback_days * SECONDS_PER_DAY as f64) as i64;
                    let window: Vec<&(i64, i32, i32)> = history
                        .iter()
                        .filter(|(ts, _, _)| *ts >= t - lookback_secs)
                        .collect();
                    let p_u =
                        window.iter().map(|(_, p, _)| *p as f64).sum::<f64>() / window.len() as f64;
                    let n_u =
                        window.iter().map(|(_, _, n)| *n as f64).sum::<f64>() / window.len() as f64;
                    let rule_fired = n_u.abs() > spec.rule_threshold;
                    let mut ina = rule_fired;
                    if spec.label_noise > 0.0 && rng.random::<f64>() < spec.label_noise {
                        ina = !ina;
                    }
                    let threshold_secs = threshold_secs.expect("set when inactivity is planted");
                    let gap = if ina {
                        gap_seconds(&mut rng, spec.ina_gap_days).max(threshold_secs)
                    } else {
                        gap_seconds(&mut rng, spec.act_gap_days)
                            .clamp(lookback_secs + 1, threshold_secs - 1)
                    };
                    truth.intervals.push(TruthInterval {
                        author: author.clone(),
                        start_ts: t,
                        gap_days: gap as f64 / SECONDS_PER_DAY as f64,
                        label: if ina { TruthLabel::Ina } else { TruthLabel::Act },
                        rule_fired,
                        p_u,
                        n_u,
                    });
                    t += gap;
                }
                None => {
                    t += gap_seconds(&mut rng, config.default_gap_days).max(1);
                }
            }
        }
    }
    let corpus = Corpus::new(config.channel, messages)?;
    Ok((corpus, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_corpus_jsonl;

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig::activity(0.1, 1.9);
        let (a, _) = generate_synthetic_corpus(&config, 9).unwrap();
        let (b, _) = generate_synthetic_corpus(&config, 9).unwrap();
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        write_corpus_jsonl(&mut bytes_a, &a).unwrap();
        write_corpus_jsonl(&mut bytes_b, &b).unwrap();
        assert_eq!(bytes_a, bytes_b);
        let (c, _) = generate_synthetic_corpus(&config, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_single_message_corpus() {
        let mut config = SynthConfig::activity(0.1, 1.9);
        config.contributors = 1;
        config.messages_per_contributor = (1, 1);
        let (corpus, truth) = generate_synthetic_corpus(&config, 1).unwrap();
        assert_eq!(corpus.len(), 1);
        assert!(truth.intervals.is_empty());
    }

    #[test]
    fn infeasible_prior_is_rejected() {
        let mut config = SynthConfig::activity(0.1, 1.9);
        config.inactivity.as_mut().unwrap().target_prior = 1.5;
        assert!(matches!(
            generate_synthetic_corpus(&config, 1),
            Err(CorpusError::InvalidConfig(_))
        ));
    }

    #[test]
    fn mixture_prior_mismatch_is_rejected() {
        let mut config = SynthConfig::activity(0.1, 1.9);
        config.classes[0].polarity_probs = [0.0, 0.3, 0.7];
        assert!(matches!(
            generate_synthetic_corpus(&config, 1),
            Err(CorpusError::InvalidConfig(_))
        ));
    }

    #[test]
    fn planted_prior_is_reproduced() {
        let mut config = SynthConfig::activity(0.088, 1.9);
        config.contributors = 3_000;
        config.messages_per_contributor = (10, 25);
        let (_, truth) = generate_synthetic_corpus(&config, 42).unwrap();
        assert!(truth.intervals.len() >= 10_000);
        let prior = truth.empirical_prior().unwrap();
        assert!((prior - 0.088).abs() <= 0.01, "empirical prior {prior}");
    }

    #[test]
    fn scoring_text_reproduces_planted_scores() {
        let lexicon = synthetic_lexicon();
        let mut config = SynthConfig::activity(0.2, 1.9);
        config.contributors = 50;
        config.classes[0].polarity_probs = [0.3, 0.2, 0.5];
        config.inactivity.as_mut().unwrap().target_prior = 0.2;
        let (corpus, _) = generate_synthetic_corpus(&config, 5).unwrap();
        for m in corpus.messages() {
            let rescored = lexicon.score(&m.text);
            assert_eq!(Some(rescored), m.score, "text {:?}", m.text);
        }
    }

    #[test]
    fn rule_matches_labels_without_noise() {
        let (_, truth) =
            generate_synthetic_corpus(&SynthConfig::activity(0.15, 1.9), 3).unwrap();
        for i in &truth.intervals {
            assert_eq!(i.rule_fired, i.label == TruthLabel::Ina);
            assert_eq!(i.rule_fired, i.n_u.abs() > 1.9);
        }
    }

    #[test]
    fn polarity_frequencies_match_configured_probabilities() {
        // Chi-square goodness of fit on the planted polarity mixture.
        use crate::sentiment::Polarity;
        let mut config = SynthConfig::activity(0.25, 1.9);
        config.contributors = 500;
        config.messages_per_contributor = (20, 20);
        config.classes[0].polarity_probs = [0.35, 0.25, 0.40];
        config.inactivity.as_mut().unwrap().target_prior = 0.25;
        let (corpus, _) = generate_synthetic_corpus(&config, 8).unwrap();
        assert!(corpus.len() >= 10_000);
        let mut counts = [0usize; 3];
        for m in corpus.messages() {
            match m.score.unwrap().polarity() {
                Polarity::Positive => counts[0] += 1,
                Polarity::Negative => counts[1] += 1,
                _ => counts[2] += 1,
            }
        }
        let n = corpus.len() as f64;
        let stat: f64 = counts
            .iter()
            .zip(&config.classes[0].polarity_probs)
            .map(|(&c, &p)| {
                let expected = n * p;
                (c as f64 - expected).powi(2) / expected
            })
            .sum();
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        let p = ChiSquared::new(2.0).unwrap().sf(stat);
        assert!(p > 0.01, "goodness-of-fit p = {p}");
    }
}
