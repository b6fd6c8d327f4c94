//! Lexicon-based dual-polarity scoring of short informal messages.
//!
//! Each message receives a positive strength `p` in [1, 5] and a negative
//! strength `n` in [-5, -1], aggregated into a polarity class: positive when
//! `p + n > 0`, negative when `p + n < 0`, neutral when the strengths balance
//! below 4, and discarded for the extreme (4, -4) / (5, -5) balances.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use thiserror::Error;

/// How many tokens before a matched term a negator may appear.
const NEGATION_WINDOW: usize = 2;

#[derive(Error, Debug)]
pub enum LexiconError {
    #[error("{file}:{line}: {reason}")]
    Load {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("reading {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Error, Debug)]
#[error("score out of range: p={p}, n={n} (need p in [1,5], n in [-5,-1])")]
pub struct ScoreRangeError {
    pub p: i32,
    pub n: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
    Neutral,
    Discarded,
}

impl Polarity {
    /// Scalar polarity: +1, -1 or 0; discarded messages carry no value.
    pub fn scalar(self) -> Option<i32> {
        match self {
            Polarity::Positive => Some(1),
            Polarity::Negative => Some(-1),
            Polarity::Neutral => Some(0),
            Polarity::Discarded => None,
        }
    }
}

impl std::fmt::Display for Polarity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Neutral => "neutral",
            Polarity::Discarded => "discarded",
        };
        write!(f, "{s}")
    }
}

/// Dual-polarity sentiment strengths with the derived polarity class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentScore {
    p: i32,
    n: i32,
    polarity: Polarity,
}

impl SentimentScore {
    pub fn new(p: i32, n: i32) -> Result<Self, ScoreRangeError> {
        let polarity = classify_polarity(p, n)?;
        Ok(SentimentScore { p, n, polarity })
    }

    pub fn p(&self) -> i32 {
        self.p
    }

    pub fn n(&self) -> i32 {
        self.n
    }

    pub fn polarity(&self) -> Polarity {
        self.polarity
    }
}

/// Polarity from the aggregation rule: positive if `p + n > 0`, negative if
/// `p + n < 0`; balanced strengths are neutral below 4 and discarded at
/// (4, -4) and (5, -5).
pub fn classify_polarity(p: i32, n: i32) -> Result<Polarity, ScoreRangeError> {
    if !(1..=5).contains(&p) || !(-5..=-1).contains(&n) {
        return Err(ScoreRangeError { p, n });
    }
    Ok(match (p + n).signum() {
        1 => Polarity::Positive,
        -1 => Polarity::Negative,
        _ if p >= 4 => Polarity::Discarded,
        _ => Polarity::Neutral,
    })
}

/// Scored-term lexicon with negators and boosters.
///
/// Term patterns optionally end in `*` for prefix matching; strengths are
/// integers in [-5, -2] or [2, 5]. Boosters carry a +1 or -1 magnitude
/// modifier and apply to the immediately following term; negators invert the
/// sign of a term within the following two tokens.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    exact: HashMap<String, i32>,
    /// Wildcard stems, kept sorted by descending length so the first prefix
    /// hit is the longest.
    prefixes: Vec<(String, i32)>,
    negators: HashSet<String>,
    boosters: HashMap<String, i32>,
}

impl Lexicon {
    /// Build a lexicon from in-memory entries, applying the same validation
    /// as the file loader.
    pub fn from_entries(
        terms: &[(&str, i32)],
        negators: &[&str],
        boosters: &[(&str, i32)],
    ) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        for (i, (pattern, strength)) in terms.iter().enumerate() {
            lex.add_term("<terms>", i + 1, pattern, *strength)?;
        }
        for (i, tok) in negators.iter().enumerate() {
            lex.add_negator("<negators>", i + 1, tok)?;
        }
        for (i, (tok, m)) in boosters.iter().enumerate() {
            lex.add_booster("<boosters>", i + 1, tok, *m)?;
        }
        Ok(lex)
    }

    pub fn is_empty(&self) -> bool {
        self.exact.is_empty() && self.prefixes.is_empty()
    }

    pub fn term_count(&self) -> usize {
        self.exact.len() + self.prefixes.len()
    }

    fn add_term(
        &mut self,
        file: &str,
        line: usize,
        pattern: &str,
        strength: i32,
    ) -> Result<(), LexiconError> {
        let err = |reason: String| LexiconError::Load {
            file: file.to_string(),
            line,
            reason,
        };
        let magnitude = strength.abs();
        if !(2..=5).contains(&magnitude) {
            return Err(err(format!(
                "strength {strength} out of range [-5,-2] or [2,5]"
            )));
        }
        let pattern = pattern.to_lowercase();
        if pattern.is_empty() || pattern == "*" {
            return Err(err("empty pattern".into()));
        }
        let duplicate = if let Some(stem) = pattern.strip_suffix('*') {
            self.prefixes.iter().any(|(s, _)| s == stem)
        } else {
            self.exact.contains_key(&pattern)
        };
        if duplicate {
            return Err(err(format!("duplicate pattern {pattern:?}")));
        }
        if self.negators.contains(&pattern) || self.boosters.contains_key(&pattern) {
            return Err(err(format!(
                "pattern {pattern:?} already registered as negator or booster"
            )));
        }
        if let Some(stem) = pattern.strip_suffix('*') {
            self.prefixes.push((stem.to_string(), strength));
            self.prefixes.sort_by(|a, b| b.0.len().cmp(&a.0.len()));
        } else {
            self.exact.insert(pattern, strength);
        }
        Ok(())
    }

    fn add_negator(&mut self, file: &str, line: usize, token: &str) -> Result<(), LexiconError> {
        let token = token.to_lowercase();
        if self.exact.contains_key(&token) || self.boosters.contains_key(&token) {
            return Err(LexiconError::Load {
                file: file.to_string(),
                line,
                reason: format!("negator {token:?} collides with a scored term or booster"),
            });
        }
        self.negators.insert(token);
        Ok(())
    }

    fn add_booster(
        &mut self,
        file: &str,
        line: usize,
        token: &str,
        modifier: i32,
    ) -> Result<(), LexiconError> {
        let err = |reason: String| LexiconError::Load {
            file: file.to_string(),
            line,
            reason,
        };
        if modifier != 1 && modifier != -1 {
            return Err(err(format!("booster modifier must be +1 or -1, got {modifier}")));
        }
        let token = token.to_lowercase();
        if self.exact.contains_key(&token) || self.negators.contains(&token) {
            return Err(err(format!(
                "booster {token:?} collides with a scored term or negator"
            )));
        }
        self.boosters.insert(token, modifier);
        Ok(())
    }

    fn lookup(&self, token: &str) -> Option<i32> {
        if let Some(&s) = self.exact.get(token) {
            return Some(s);
        }
        self.prefixes
            .iter()
            .find(|(stem, _)| token.starts_with(stem.as_str()))
            .map(|&(_, s)| s)
    }

    /// Score a message body.
    ///
    /// Tokens are matched against the lexicon (exact first, then longest
    /// wildcard prefix). A booster directly before a matched term shifts its
    /// magnitude within [2, 5]; a negator within the two preceding tokens
    /// inverts its sign. `p` is the strongest positive match (1 if none) and
    /// `n` the strongest negative match (-1 if none).
    pub fn score(&self, text: &str) -> SentimentScore {
        let tokens = tokenize(text);
        let mut p = 1;
        let mut n = -1;
        for (i, token) in tokens.iter().enumerate() {
            let Some(strength) = self.lookup(token) else {
                continue;
            };
            let mut magnitude = strength.abs();
            if i > 0 {
                if let Some(&m) = self.boosters.get(tokens[i - 1].as_str()) {
                    magnitude = (magnitude + m).clamp(2, 5);
                }
            }
            let mut sign = strength.signum();
            let negated = tokens[i.saturating_sub(NEGATION_WINDOW)..i]
                .iter()
                .any(|t| self.negators.contains(t.as_str()));
            if negated {
                sign = -sign;
            }
            let value = sign * magnitude;
            if value > 0 {
                p = p.max(value);
            } else {
                n = n.min(value);
            }
        }
        SentimentScore::new(p, n).expect("clamped strengths are in range")
    }
}

/// Lowercase tokens split on non-alphanumeric characters, keeping intra-word
/// apostrophes ("don't" stays one token).
fn tokenize(text: &str) -> Vec<String> {
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    let mut tokens = Vec::new();
    let mut current = String::new();
    for (i, &c) in chars.iter().enumerate() {
        let keep = c.is_alphanumeric()
            || (c == '\''
                && i > 0
                && chars[i - 1].is_alphanumeric()
                && chars.get(i + 1).is_some_and(|d| d.is_alphanumeric()));
        if keep {
            current.push(c);
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Load a lexicon from `terms.tsv`, `negators.txt` and `boosters.tsv`.
///
/// `terms.tsv` holds `pattern<TAB>strength` lines, `negators.txt` one token
/// per line and `boosters.tsv` `token<TAB>+1|-1`; `#` starts a comment in all
/// three.
pub fn load_lexicon(
    term_file: &Path,
    negator_file: &Path,
    booster_file: &Path,
) -> Result<Lexicon, LexiconError> {
    let mut lex = Lexicon::default();
    // Negators and boosters load first so term/negator collisions are caught
    // regardless of file order.
    for (line_no, line) in read_lines(negator_file)? {
        lex.add_negator(&negator_file.display().to_string(), line_no, &line)?;
    }
    for (line_no, line) in read_lines(booster_file)? {
        let (token, modifier) = split_tsv(booster_file, line_no, &line)?;
        let modifier = modifier.parse::<i32>().map_err(|_| LexiconError::Load {
            file: booster_file.display().to_string(),
            line: line_no,
            reason: format!("invalid booster modifier {modifier:?}"),
        })?;
        lex.add_booster(&booster_file.display().to_string(), line_no, token, modifier)?;
    }
    for (line_no, line) in read_lines(term_file)? {
        let (pattern, strength) = split_tsv(term_file, line_no, &line)?;
        let strength = strength.parse::<i32>().map_err(|_| LexiconError::Load {
            file: term_file.display().to_string(),
            line: line_no,
            reason: format!("invalid strength {strength:?}"),
        })?;
        lex.add_term(&term_file.display().to_string(), line_no, pattern, strength)?;
    }
    Ok(lex)
}

/// Convenience: load the three conventional files from one directory.
pub fn load_lexicon_dir(dir: &Path) -> Result<Lexicon, LexiconError> {
    load_lexicon(
        &dir.join("terms.tsv"),
        &dir.join("negators.txt"),
        &dir.join("boosters.tsv"),
    )
}

/// Write a lexicon's entries in the conventional three-file layout.
pub fn write_lexicon_dir(
    dir: &Path,
    terms: &[(&str, i32)],
    negators: &[&str],
    boosters: &[(&str, i32)],
) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let term_lines: String = terms
        .iter()
        .map(|(p, s)| format!("{p}\t{s}\n"))
        .collect();
    fs::write(dir.join("terms.tsv"), term_lines)?;
    let negator_lines: String = negators.iter().map(|t| format!("{t}\n")).collect();
    fs::write(dir.join("negators.txt"), negator_lines)?;
    let booster_lines: String = boosters
        .iter()
        .map(|(t, m)| format!("{t}\t{m:+}\n"))
        .collect();
    fs::write(dir.join("boosters.tsv"), booster_lines)
}

fn read_lines(path: &Path) -> Result<Vec<(usize, String)>, LexiconError> {
    let content = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        file: path.display().to_string(),
        source,
    })?;
    Ok(content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn split_tsv<'a>(path: &Path, line_no: usize, line: &'a str) -> Result<(&'a str, &'a str), LexiconError> {
    line.split_once('\t').ok_or_else(|| LexiconError::Load {
        file: path.display().to_string(),
        line: line_no,
        reason: "expected <TAB>-separated fields".into(),
    })
}
