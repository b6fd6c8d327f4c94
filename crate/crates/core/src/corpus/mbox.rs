//! Parser for "From "-delimited mbox archives.
//!
//! Threads are identified by the normalized subject; reply prefixes are
//! stripped so "Re: X" and "X" share one discussion id. Body text keeps only
//! text MIME parts, with quoted (">")-prefixed lines removed.

use super::{normalize_subject, strip_quoted_lines, Channel, Message, ParseOutcome, RecordError};
use mail_parser::MessageParser;

/// Parse an mbox stream into messages.
///
/// Records missing a Date or From header are collected as errors; bodies
/// that needed a lossy charset decode are flagged among the record errors
/// (with the message still kept).
pub fn parse_mbox(bytes: &[u8]) -> ParseOutcome {
    let mut outcome = ParseOutcome {
        messages: Vec::new(),
        record_errors: Vec::new(),
    };
    let parser = MessageParser::default();
    for (ordinal, raw) in split_mbox(bytes).into_iter().enumerate() {
        let locator = format!("message {ordinal}");
        let decoded = unescape_mboxrd(raw);
        let Some(mail) = parser.parse(&decoded) else {
            outcome.record_errors.push(RecordError {
                locator,
                reason: "unparseable message".into(),
            });
            continue;
        };
        let author = mail
            .from()
            .and_then(|a| a.first())
            .and_then(|addr| {
                addr.address()
                    .map(str::to_string)
                    .or_else(|| addr.name().map(str::to_string))
            })
            .filter(|a| !a.is_empty());
        let Some(author) = author else {
            outcome.record_errors.push(RecordError {
                locator,
                reason: "missing From header".into(),
            });
            continue;
        };
        let Some(ts) = mail.date().map(|d| d.to_timestamp()).filter(|&t| t >= 0) else {
            outcome.record_errors.push(RecordError {
                locator,
                reason: "missing or invalid Date header".into(),
            });
            continue;
        };
        let subject = mail.subject().unwrap_or("");
        let mut discussion_id = normalize_subject(subject);
        if discussion_id.is_empty() {
            discussion_id = "(no subject)".to_string();
        }
        let body = mail.body_text(0).unwrap_or_default();
        if body.contains('\u{FFFD}') {
            outcome.record_errors.push(RecordError {
                locator: locator.clone(),
                reason: "lossy charset decode".into(),
            });
        }
        let id = mail
            .message_id()
            .map(|m| m.to_string())
            .filter(|m| !m.is_empty())
            .unwrap_or_else(|| format!("mbox-{ordinal}"));
        outcome.messages.push(Message {
            id: format!("{ordinal}:{id}"),
            author,
            ts,
            discussion_id,
            channel: Channel::MailingList,
            text: strip_quoted_lines(&body),
            score: None,
        });
    }
    outcome
        .messages
        .sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.id.cmp(&b.id)));
    outcome
}

/// Split on separator lines beginning with "From " (column zero). The
/// separator line itself is not part of the message.
fn split_mbox(bytes: &[u8]) -> Vec<&[u8]> {
    let mut starts = Vec::new();
    let mut at_line_start = true;
    let mut i = 0;
    while i < bytes.len() {
        if at_line_start && bytes[i..].starts_with(b"From ") {
            starts.push(i);
        }
        at_line_start = bytes[i] == b'\n';
        i += 1;
    }
    let mut chunks = Vec::with_capacity(starts.len());
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(bytes.len());
        let body_start = bytes[start..end]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| start + p + 1)
            .unwrap_or(end);
        chunks.push(&bytes[body_start..end]);
    }
    chunks
}

/// Reverse mboxrd quoting: a line of the form `>+From ` loses one `>`.
fn unescape_mboxrd(raw: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(raw.len());
    for line in raw.split_inclusive(|&b| b == b'\n') {
        let quotes = line.iter().take_while(|&&b| b == b'>').count();
        if quotes > 0 && line[quotes..].starts_with(b"From ") {
            out.extend_from_slice(&line[1..]);
        } else {
            out.extend_from_slice(line);
        }
    }
    out
}
