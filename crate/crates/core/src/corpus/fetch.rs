//! Rate-limited Bugzilla REST client for mining bug comments.
//!
//! Fetches `/rest/bug/{id}/comment` for a bug range and emits an export in
//! the same JSON schema accepted by
//! [`parse_bugzilla_export`](super::bugzilla::parse_bugzilla_export). Client
//! 4xx responses are permanent per-bug errors; 5xx and transport failures
//! are retried up to a cap, with every attempt paced by the rate limit.

use super::RecordError;
use serde::Deserialize;
use serde_json::json;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Error, Debug)]
pub enum FetchError {
    #[error("invalid bug range {low}..{high}")]
    InvalidRange { low: u64, high: u64 },
    #[error("invalid rate limit {0} requests/second")]
    InvalidRateLimit(f64),
}

#[derive(Debug, Clone)]
pub struct FetchConfig {
    pub base_url: String,
    /// Maximum request rate in requests per second.
    pub rate_limit_rps: f64,
    /// Retry cap for transient (5xx / transport) failures per bug.
    pub max_retries: u32,
    pub timeout: Duration,
}

impl FetchConfig {
    pub fn new(base_url: impl Into<String>, rate_limit_rps: f64) -> Self {
        FetchConfig {
            base_url: base_url.into(),
            rate_limit_rps,
            max_retries: 3,
            timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug)]
pub struct FetchOutcome {
    /// JSON export in the documented subset schema.
    pub export: Vec<u8>,
    pub errors: Vec<RecordError>,
    pub bugs_fetched: usize,
}

/// Spaces requests evenly at the configured rate; the first slot is free.
struct RateLimiter {
    interval: Duration,
    next_slot: Option<Instant>,
}

impl RateLimiter {
    fn new(rps: f64) -> Self {
        RateLimiter {
            interval: Duration::from_secs_f64(1.0 / rps),
            next_slot: None,
        }
    }

    fn acquire(&mut self) {
        let now = Instant::now();
        match self.next_slot {
            Some(slot) => {
                if slot > now {
                    std::thread::sleep(slot - now);
                }
                self.next_slot = Some(slot.max(now) + self.interval);
            }
            None => self.next_slot = Some(now + self.interval),
        }
    }
}

#[derive(Deserialize)]
struct CommentsResponse {
    bugs: std::collections::BTreeMap<String, BugComments>,
}

#[derive(Deserialize)]
struct BugComments {
    #[serde(default)]
    comments: Vec<WireComment>,
}

#[derive(Deserialize)]
struct WireComment {
    #[serde(alias = "author")]
    creator: Option<String>,
    creation_time: Option<String>,
    text: Option<String>,
}

/// Fetch comment streams for bugs `low..=high`.
pub fn fetch_bugzilla(
    config: &FetchConfig,
    low: u64,
    high: u64,
) -> Result<FetchOutcome, FetchError> {
    if low > high {
        return Err(FetchError::InvalidRange { low, high });
    }
    if !(config.rate_limit_rps > 0.0) {
        return Err(FetchError::InvalidRateLimit(config.rate_limit_rps));
    }
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .timeout_global(Some(config.timeout))
        .http_status_as_error(false)
        .build()
        .into();
    let mut limiter = RateLimiter::new(config.rate_limit_rps);
    let base = config.base_url.trim_end_matches('/');

    let mut bugs = Vec::new();
    let mut errors = Vec::new();
    for bug_id in low..=high {
        let url = format!("{base}/rest/bug/{bug_id}/comment");
        match fetch_one(&agent, &mut limiter, &url, config.max_retries) {
            Ok(body) => match serde_json::from_str::<CommentsResponse>(&body) {
                Ok(parsed) => {
                    let comments: Vec<serde_json::Value> = parsed
                        .bugs
                        .into_values()
                        .flat_map(|b| b.comments)
                        .map(|c| {
                            json!({
                                "author": c.creator,
                                "creation_time": c.creation_time,
                                "text": c.text,
                            })
                        })
                        .collect();
                    bugs.push(json!({ "id": bug_id, "comments": comments }));
                }
                Err(e) => errors.push(RecordError {
                    locator: format!("bug {bug_id}"),
                    reason: format!("invalid response body: {e}"),
                }),
            },
            Err(reason) => errors.push(RecordError {
                locator: format!("bug {bug_id}"),
                reason,
            }),
        }
    }
    let bugs_fetched = bugs.len();
    let export = serde_json::to_vec_pretty(&json!({ "bugs": bugs })).expect("serializable export");
    Ok(FetchOutcome {
        export,
        errors,
        bugs_fetched,
    })
}

fn fetch_one(
    agent: &ureq::Agent,
    limiter: &mut RateLimiter,
    url: &str,
    max_retries: u32,
) -> Result<String, String> {
    let mut attempt = 0;
    loop {
        limiter.acquire();
        let result = agent.get(url).call();
        match result {
            Ok(mut response) => {
                let status = response.status().as_u16();
                if (200..300).contains(&status) {
                    return response
                        .body_mut()
                        .read_to_string()
                        .map_err(|e| format!("read failed: {e}"));
                }
                if (400..500).contains(&status) {
                    return Err(format!("permanent HTTP {status}"));
                }
                // 5xx and anything else is transient.
                if attempt >= max_retries {
                    return Err(format!("HTTP {status} after {attempt} retries"));
                }
            }
            Err(e) => {
                if attempt >= max_retries {
                    return Err(format!("transport failure after {attempt} retries: {e}"));
                }
            }
        }
        attempt += 1;
    }
}
