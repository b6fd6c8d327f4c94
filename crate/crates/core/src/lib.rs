//! Contributor emotion analytics for open-source communication archives.
//!
//! The crate ingests bug-tracker and mailing-list corpora, scores message
//! sentiment with a pluggable lexicon, classifies collective emotions of
//! discussions, extracts interevent-time activity statistics, and predicts
//! imminent contributor inactivity from recent emotional expression.

pub mod activity;
pub mod churn;
pub mod corpus;
pub mod discussion;
pub mod pipeline;
pub mod sentiment;
pub mod stats;
