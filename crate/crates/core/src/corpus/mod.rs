//! Normalized message corpus: parsing of bug-tracker and mailing-list
//! archives, JSONL persistence, summary statistics and responsiveness
//! metrics.

pub mod bugzilla;
pub mod fetch;
pub mod mbox;
pub mod synth;

use crate::sentiment::SentimentScore;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::io::{BufRead, Write};
use thiserror::Error;

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Error, Debug)]
pub enum CorpusError {
    #[error("parse error at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("corpus line {line}: {reason}")]
    BadRecord { line: usize, reason: String },
    #[error("duplicate message id {0:?}")]
    DuplicateId(String),
    #[error("message {id:?}: {reason}")]
    InvalidMessage { id: String, reason: String },
    #[error("mixed channels in one corpus ({0} and {1})")]
    MixedChannels(Channel, Channel),
    #[error("operation requires a {expected} corpus, got {got}")]
    WrongChannel { expected: Channel, got: Channel },
    #[error("synthetic corpus config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "bug")]
    BugTracker,
    #[serde(rename = "ml")]
    MailingList,
}

impl std::fmt::Display for Channel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Channel::BugTracker => write!(f, "bug tracker"),
            Channel::MailingList => write!(f, "mailing list"),
        }
    }
}

/// One bug comment or email message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MessageRow", into = "MessageRow")]
pub struct Message {
    pub id: String,
    pub author: String,
    /// UTC seconds since epoch.
    pub ts: i64,
    pub discussion_id: String,
    pub channel: Channel,
    pub text: String,
    pub score: Option<SentimentScore>,
}

/// Wire form of a message: one JSONL object per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MessageRow {
    id: String,
    author: String,
    ts: i64,
    disc: String,
    chan: Channel,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<i32>,
}

impl TryFrom<MessageRow> for Message {
    type Error = String;

    fn try_from(row: MessageRow) -> Result<Self, String> {
        let score = match (row.p, row.n) {
            (Some(p), Some(n)) => {
                Some(SentimentScore::new(p, n).map_err(|e| e.to_string())?)
            }
            (None, None) => None,
            _ => return Err("p and n must be both present or both absent".into()),
        };
        let msg = Message {
            id: row.id,
            author: row.author,
            ts: row.ts,
            discussion_id: row.disc,
            channel: row.chan,
            text: row.text,
            score,
        };
        msg.validate().map_err(|e| e.to_string())?;
        Ok(msg)
    }
}

impl From<Message> for MessageRow {
    fn from(m: Message) -> Self {
        MessageRow {
            id: m.id,
            author: m.author,
            ts: m.ts,
            disc: m.discussion_id,
            chan: m.channel,
            text: m.text,
            p: m.score.map(|s| s.p()),
            n: m.score.map(|s| s.n()),
        }
    }
}

impl Message {
    fn validate(&self) -> Result<(), CorpusError> {
        let fail = |reason: &str| {
            Err(CorpusError::InvalidMessage {
                id: self.id.clone(),
                reason: reason.to_string(),
            })
        };
        if self.ts < 0 {
            return fail("timestamp before epoch");
        }
        if self.author.is_empty() {
            return fail("empty author");
        }
        if self.discussion_id.is_empty() {
            return fail("empty discussion id");
        }
        if self
            .text
            .lines()
            .any(|l| l.trim_start().starts_with('>'))
        {
            return fail("text contains quoted lines");
        }
        Ok(())
    }

    /// Day index of the message timestamp (UTC midnight boundaries).
    pub fn day(&self) -> i64 {
        self.ts.div_euclid(SECONDS_PER_DAY)
    }
}

/// Messages of one channel, sorted by timestamp, with unique ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    channel: Channel,
    messages: Vec<Message>,
    /// (min, max) timestamp; `None` for an empty corpus.
    window: Option<(i64, i64)>,
}

impl Corpus {
    pub fn new(channel: Channel, mut messages: Vec<Message>) -> Result<Self, CorpusError> {
        let mut ids = HashSet::with_capacity(messages.len());
        for m in &messages {
            m.validate()?;
            if m.channel != channel {
                return Err(CorpusError::MixedChannels(channel, m.channel));
            }
            if !ids.insert(m.id.clone()) {
                return Err(CorpusError::DuplicateId(m.id.clone()));
            }
        }
        messages.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.id.cmp(&b.id)));
        let window = match (messages.first(), messages.last()) {
            (Some(f), Some(l)) => Some((f.ts, l.ts)),
            _ => None,
        };
        Ok(Corpus {
            channel,
            messages,
            window,
        })
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn messages(&self) -> &[Message] {
        &self.messages
    }

    pub fn window(&self) -> Option<(i64, i64)> {
        self.window
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }

    /// Replace message scores, preserving order and identity.
    pub fn with_scores(
        &self,
        scores: Vec<Option<SentimentScore>>,
    ) -> Result<Corpus, CorpusError> {
        assert_eq!(scores.len(), self.messages.len());
        let messages = self
            .messages
            .iter()
            .zip(scores)
            .map(|(m, score)| Message {
                score,
                ..m.clone()
            })
            .collect();
        Corpus::new(self.channel, messages)
    }
}

/// Corpus-level counts per Table-I layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub message_count: usize,
    pub discussion_count: usize,
    pub contributor_count: usize,
    pub window: Option<(i64, i64)>,
}

/// Counts of messages, distinct discussions and distinct authors.
pub fn corpus_summary(corpus: &Corpus) -> SummaryStats {
    let mut discussions = HashSet::new();
    let mut authors = HashSet::new();
    for m in corpus.messages() {
        discussions.insert(m.discussion_id.as_str());
        authors.insert(m.author.as_str());
    }
    SummaryStats {
        message_count: corpus.len(),
        discussion_count: discussions.len(),
        contributor_count: authors.len(),
        window: corpus.window(),
    }
}

/// Remove every line whose first non-blank character is `>`.
pub fn strip_quoted_lines(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut first = true;
    for line in raw.lines() {
        if line.trim_start().starts_with('>') {
            continue;
        }
        if !first {
            out.push('\n');
        }
        out.push_str(line);
        first = false;
    }
    out
}

/// Normalize a mail subject into a thread id: strip repeated reply/forward
/// prefixes case-insensitively, collapse whitespace, lowercase.
pub fn normalize_subject(subject: &str) -> String {
    let mut s = subject.trim();
    loop {
        let lower = s.to_lowercase();
        let stripped = ["re:", "fwd:", "fw:"]
            .iter()
            .find(|p| lower.starts_with(**p))
            .map(|p| s[p.len()..].trim_start());
        match stripped {
            Some(rest) => s = rest,
            None => break,
        }
    }
    s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

/// One point of the bug-responsiveness series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    /// Day index (UTC) the window ends on.
    pub day: i64,
    /// Discussions whose first message falls inside the window.
    pub opened: usize,
    /// `opened` divided by the window length in days.
    pub opened_per_day: f64,
    /// Median delay in days from a discussion's first to its second message;
    /// discussions with fewer than two messages are excluded.
    pub median_first_reply_days: Option<f64>,
}

/// Per-day sliding-window count of newly opened bugs and median first-reply
/// delay. Only defined for bug-tracker corpora.
pub fn bug_response_metrics(
    corpus: &Corpus,
    window_days: u32,
) -> Result<Vec<ResponsePoint>, CorpusError> {
    if corpus.channel() != Channel::BugTracker {
        return Err(CorpusError::WrongChannel {
            expected: Channel::BugTracker,
            got: corpus.channel(),
        });
    }
    let window_days = window_days.max(1) as i64;
    // First and second message timestamp per discussion (input is sorted).
    let mut first_two: std::collections::HashMap<&str, (i64, Option<i64>)> =
        std::collections::HashMap::new();
    for m in corpus.messages() {
        match first_two.get_mut(m.discussion_id.as_str()) {
            None => {
                first_two.insert(&m.discussion_id, (m.ts, None));
            }
            Some((_, second @ None)) => *second = Some(m.ts),
            Some(_) => {}
        }
    }
    let Some((start, end)) = corpus.window() else {
        return Ok(Vec::new());
    };
    let mut openings: Vec<(i64, Option<f64>)> = first_two
        .values()
        .map(|&(first, second)| {
            let delay = second.map(|s| (s - first) as f64 / SECONDS_PER_DAY as f64);
            (first.div_euclid(SECONDS_PER_DAY), delay)
        })
        .collect();
    openings.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap().reverse()));

    let first_day = start.div_euclid(SECONDS_PER_DAY);
    let last_day = end.div_euclid(SECONDS_PER_DAY);
    let mut points = Vec::new();
    for day in first_day..=last_day {
        let lo = day - window_days + 1;
        let in_window: Vec<&(i64, Option<f64>)> = openings
            .iter()
            .filter(|(d, _)| *d >= lo && *d <= day)
            .collect();
        let mut delays: Vec<f64> = in_window.iter().filter_map(|(_, d)| *d).collect();
        delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.push(ResponsePoint {
            day,
            opened: in_window.len(),
            opened_per_day: in_window.len() as f64 / window_days as f64,
            median_first_reply_days: median_sorted(&delays),
        });
    }
    Ok(points)
}

fn median_sorted(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

/// Write one message per line in the JSONL schema.
pub fn write_corpus_jsonl<W: Write>(writer: &mut W, corpus: &Corpus) -> Result<(), CorpusError> {
    for m in corpus.messages() {
        serde_json::to_writer(&mut *writer, m)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Read a JSONL corpus. All rows must share one channel.
pub fn read_corpus_jsonl<R: BufRead>(reader: R) -> Result<Corpus, CorpusError> {
    let mut messages: Vec<Message> = Vec::new();
    let mut channel: Option<Channel> = None;
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let msg: Message = serde_json::from_str(&line).map_err(|e| CorpusError::BadRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        match channel {
            None => channel = Some(msg.channel),
            Some(c) if c != msg.channel => {
                return Err(CorpusError::MixedChannels(c, msg.channel))
            }
            _ => {}
        }
        messages.push(msg);
    }
    let channel = channel.unwrap_or(Channel::BugTracker);
    Corpus::new(channel, messages)
}

/// A tolerated per-record failure produced while parsing an archive.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordError {
    /// Position of the offending record (bug id, message ordinal, ...).
    pub locator: String,
    pub reason: String,
}

/// Result of parsing one archive stream: the recovered messages plus the
/// records that had to be skipped or repaired.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub messages: Vec<Message>,
    pub record_errors: Vec<RecordError>,
}

impl ParseOutcome {
    pub fn into_corpus(self, channel: Channel) -> Result<(Corpus, Vec<RecordError>), CorpusError> {
        Ok((Corpus::new(channel, self.messages)?, self.record_errors))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn message(id: &str, author: &str, ts: i64, disc: &str) -> Message {
        Message {
            id: id.into(),
            author: author.into(),
            ts,
            discussion_id: disc.into(),
            channel: Channel::BugTracker,
            text: format!("body of {id}"),
            score: None,
        }
    }

    #[test]
    fn strip_quoted_basic() {
        assert_eq!(strip_quoted_lines("> a\nb"), "b");
        assert_eq!(strip_quoted_lines("a\nb"), "a\nb");
        assert_eq!(strip_quoted_lines(">a\n > b\nc"), "c");
    }

    #[test]
    fn summary_counts() {
        let corpus = Corpus::new(
            Channel::BugTracker,
            vec![
                message("1", "ann", 10, "d1"),
                message("2", "bob", 20, "d1"),
                message("3", "ann", 30, "d2"),
            ],
        )
        .unwrap();
        let s = corpus_summary(&corpus);
        assert_eq!(
            (s.message_count, s.discussion_count, s.contributor_count),
            (3, 2, 2)
        );
        assert_eq!(s.window, Some((10, 30)));
    }

    #[test]
    fn summary_of_empty_corpus() {
        let corpus = Corpus::new(Channel::MailingList, vec![]).unwrap();
        let s = corpus_summary(&corpus);
        assert_eq!(
            (s.message_count, s.discussion_count, s.contributor_count),
            (0, 0, 0)
        );
        assert_eq!(s.window, None);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let r = Corpus::new(
            Channel::BugTracker,
            vec![message("1", "a", 0, "d"), message("1", "b", 1, "d")],
        );
        assert!(matches!(r, Err(CorpusError::DuplicateId(_))));
    }

    #[test]
    fn subject_normalization() {
        assert_eq!(normalize_subject("Re: RE: Fwd:  Broken  build"), "broken build");
        assert_eq!(normalize_subject("X"), normalize_subject("Re: X"));
        assert_eq!(normalize_subject("  plain  "), "plain");
    }

    #[test]
    fn response_metrics_single_bug() {
        let corpus = Corpus::new(
            Channel::BugTracker,
            vec![
                message("1", "a", 0, "17"),
                message("2", "b", 2 * SECONDS_PER_DAY, "17"),
            ],
        )
        .unwrap();
        let points = bug_response_metrics(&corpus, 7).unwrap();
        let with_median: Vec<_> = points
            .iter()
            .filter_map(|p| p.median_first_reply_days)
            .collect();
        assert!(with_median.iter().all(|&m| (m - 2.0).abs() < 1e-9));
    }

    #[test]
    fn response_metrics_two_openings_same_day() {
        let corpus = Corpus::new(
            Channel::BugTracker,
            vec![
                message("1", "a", 100, "b1"),
                message("2", "b", 200, "b2"),
            ],
        )
        .unwrap();
        let points = bug_response_metrics(&corpus, 1).unwrap();
        assert_eq!(points.len(), 1);
        assert_eq!(points[0].opened, 2);
        assert_eq!(points[0].opened_per_day, 2.0);
        assert_eq!(points[0].median_first_reply_days, None);
    }

    #[test]
    fn response_metrics_rejects_mailing_list() {
        let corpus = Corpus::new(Channel::MailingList, vec![]).unwrap();
        assert!(matches!(
            bug_response_metrics(&corpus, 7),
            Err(CorpusError::WrongChannel { .. })
        ));
    }

    #[test]
    fn response_metrics_exponential_median() {
        // First-reply delays drawn from Exp(lambda): median = ln 2 / lambda.
        use rand::{Rng, SeedableRng};
        let lambda = 0.5; // per day
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut messages = Vec::new();
        for b in 0..10_000i64 {
            let open = (b % 30) * SECONDS_PER_DAY + (b * 13) % 1000;
            let delay_days = -(1.0 - rng.random::<f64>()).ln() / lambda;
            let delay = (delay_days * SECONDS_PER_DAY as f64) as i64;
            messages.push(message(&format!("o{b}"), "reporter", open, &format!("b{b}")));
            messages.push(message(
                &format!("r{b}"),
                "replier",
                open + delay.max(1),
                &format!("b{b}"),
            ));
        }
        let corpus = Corpus::new(Channel::BugTracker, messages).unwrap();
        let points = bug_response_metrics(&corpus, 30).unwrap();
        // Day 29's window covers every opening.
        let full = points.iter().find(|p| p.day == 29).unwrap();
        assert_eq!(full.opened, 10_000);
        let expected = std::f64::consts::LN_2 / lambda;
        let got = full.median_first_reply_days.unwrap();
        assert!(
            (got - expected).abs() / expected < 0.05,
            "median {got} vs {expected}"
        );
    }

    #[test]
    fn jsonl_round_trip_with_scores() {
        let mut m = message("1", "ann", 5, "d");
        m.score = Some(SentimentScore::new(3, -2).unwrap());
        let corpus = Corpus::new(Channel::BugTracker, vec![m]).unwrap();
        let mut buf = Vec::new();
        write_corpus_jsonl(&mut buf, &corpus).unwrap();
        let parsed = read_corpus_jsonl(&buf[..]).unwrap();
        assert_eq!(parsed, corpus);
    }

    #[test]
    fn jsonl_rejects_half_scored_rows() {
        let line = br#"{"id":"1","author":"a","ts":0,"disc":"d","chan":"bug","text":"x","p":3}"#;
        let r = read_corpus_jsonl(&line[..]);
        assert!(matches!(r, Err(CorpusError::BadRecord { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn strip_quoted_is_idempotent(s in "\\PC{0,200}") {
            let once = strip_quoted_lines(&s);
            prop_assert_eq!(strip_quoted_lines(&once), once);
        }

        #[test]
        fn summary_is_permutation_invariant(perm in proptest::sample::subsequence((0..8usize).collect::<Vec<_>>(), 0..8)) {
            let all: Vec<Message> = (0..8)
                .map(|i| message(&format!("m{i}"), &format!("a{}", i % 3), i as i64 * 100, &format!("d{}", i % 4)))
                .collect();
            let subset: Vec<Message> = perm.iter().map(|&i| all[i].clone()).collect();
            let mut reversed = subset.clone();
            reversed.reverse();
            let a = corpus_summary(&Corpus::new(Channel::BugTracker, subset).unwrap());
            let b = corpus_summary(&Corpus::new(Channel::BugTracker, reversed).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
