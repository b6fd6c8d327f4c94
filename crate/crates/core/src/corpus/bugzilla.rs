//! Parsers for Bugzilla comment exports in JSON and XML form.
//!
//! The documented subset is, per bug, the bug id plus a list of
//! `{author, creation_time, text}` comments. Malformed documents fail with a
//! byte offset; records missing a required field are collected as
//! [`RecordError`]s while parsing continues.

use super::{strip_quoted_lines, Channel, CorpusError, Message, ParseOutcome, RecordError};
use quick_xml::events::Event;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BugzillaFormat {
    Json,
    Xml,
}

/// Parse a Bugzilla export in the requested format.
pub fn parse_bugzilla_export(
    bytes: &[u8],
    format: BugzillaFormat,
) -> Result<ParseOutcome, CorpusError> {
    match format {
        BugzillaFormat::Json => parse_json(bytes),
        BugzillaFormat::Xml => parse_xml(bytes),
    }
}

#[derive(Debug, Deserialize)]
struct JsonExport {
    bugs: Vec<JsonBug>,
}

#[derive(Debug, Deserialize)]
struct JsonBug {
    id: Option<u64>,
    #[serde(default)]
    comments: Vec<JsonComment>,
}

#[derive(Debug, Deserialize)]
struct JsonComment {
    author: Option<String>,
    creation_time: Option<String>,
    text: Option<String>,
}

fn parse_json(bytes: &[u8]) -> Result<ParseOutcome, CorpusError> {
    let export: JsonExport = serde_json::from_slice(bytes).map_err(|e| CorpusError::Malformed {
        offset: byte_offset(bytes, e.line(), e.column()),
        reason: e.to_string(),
    })?;
    let mut outcome = ParseOutcome {
        messages: Vec::new(),
        record_errors: Vec::new(),
    };
    for (bug_idx, bug) in export.bugs.into_iter().enumerate() {
        let Some(id) = bug.id else {
            outcome.record_errors.push(RecordError {
                locator: format!("bug #{bug_idx}"),
                reason: "missing bug id".into(),
            });
            continue;
        };
        for (i, c) in bug.comments.into_iter().enumerate() {
            push_comment(
                &mut outcome,
                id,
                i,
                c.author.as_deref(),
                c.creation_time.as_deref(),
                c.text.as_deref(),
            );
        }
    }
    sort_messages(&mut outcome.messages);
    Ok(outcome)
}

/// Translate serde_json's 1-based line/column into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let mut remaining = line.saturating_sub(1);
    let mut offset = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if b == b'\n' {
            remaining -= 1;
            offset = i + 1;
        }
    }
    (offset + column.saturating_sub(1)).min(bytes.len())
}

fn push_comment(
    outcome: &mut ParseOutcome,
    bug_id: u64,
    index: usize,
    author: Option<&str>,
    creation_time: Option<&str>,
    text: Option<&str>,
) {
    let locator = format!("bug {bug_id} comment {index}");
    let mut fail = |reason: String| {
        outcome.record_errors.push(RecordError { locator: locator.clone(), reason })
    };
    let Some(author) = author.filter(|a| !a.is_empty()) else {
        return fail("missing author".into());
    };
    let Some(time) = creation_time else {
        return fail("missing creation_time".into());
    };
    let ts = match parse_timestamp(time) {
        Some(ts) if ts >= 0 => ts,
        _ => return fail(format!("unparseable creation_time {time:?}")),
    };
    outcome.messages.push(Message {
        id: format!("b{bug_id}-c{index}"),
        author: author.to_string(),
        ts,
        discussion_id: bug_id.to_string(),
        channel: Channel::BugTracker,
        text: strip_quoted_lines(text.unwrap_or("")),
        score: None,
    });
}

/// Accepts RFC 3339 ("2004-01-01T12:00:00Z") and the Bugzilla XML variant
/// ("2004-01-01 12:00:00 +0000").
pub(crate) fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    if let Ok(dt) = chrono::DateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S %z") {
        return Some(dt.timestamp());
    }
    // Bare datetime, taken as UTC.
    chrono::NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .ok()
        .map(|dt| dt.and_utc().timestamp())
}

fn sort_messages(messages: &mut [Message]) {
    messages.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.id.cmp(&b.id)));
}

/// XML export: `<bugzilla><bug><bug_id>..</bug_id><long_desc><who/>
/// <bug_when/><thetext/></long_desc>..</bug></bugzilla>`.
fn parse_xml(bytes: &[u8]) -> Result<ParseOutcome, CorpusError> {
    let mut reader = quick_xml::Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);

    let mut outcome = ParseOutcome {
        messages: Vec::new(),
        record_errors: Vec::new(),
    };
    let mut path: Vec<String> = Vec::new();
    let mut bug_id: Option<u64> = None;
    let mut comment_idx = 0usize;
    let mut who: Option<String> = None;
    let mut when: Option<String> = None;
    let mut text: Option<String> = None;
    let mut pending: Vec<(usize, Option<String>, Option<String>, Option<String>)> = Vec::new();

    loop {
        let event = reader.read_event().map_err(|e| CorpusError::Malformed {
            offset: reader.buffer_position() as usize,
            reason: e.to_string(),
        })?;
        match event {
            Event::Start(ref e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).to_string();
                if name == "bug" {
                    bug_id = None;
                    comment_idx = 0;
                    pending.clear();
                }
                if name == "long_desc" {
                    who = None;
                    when = None;
                    text = None;
                }
                path.push(name);
            }
            Event::Text(ref t) => {
                let value = t.unescape().map_err(|e| CorpusError::Malformed {
                    offset: reader.buffer_position() as usize,
                    reason: e.to_string(),
                })?;
                match path.last().map(String::as_str) {
                    Some("bug_id") => bug_id = value.trim().parse().ok(),
                    Some("who") => who = Some(value.trim().to_string()),
                    Some("bug_when") => when = Some(value.trim().to_string()),
                    Some("thetext") => text = Some(value.into_owned()),
                    _ => {}
                }
            }
            Event::End(ref e) => {
                let name = String::from_utf8_lossy(e.name().as_ref()).to_string();
                if name == "long_desc" {
                    pending.push((comment_idx, who.take(), when.take(), text.take()));
                    comment_idx += 1;
                }
                if name == "bug" {
                    match bug_id {
                        Some(id) => {
                            for (i, w, t, x) in pending.drain(..) {
                                push_comment(
                                    &mut outcome,
                                    id,
                                    i,
                                    w.as_deref(),
                                    t.as_deref(),
                                    x.as_deref(),
                                );
                            }
                        }
                        None => outcome.record_errors.push(RecordError {
                            locator: "bug (unknown id)".into(),
                            reason: "missing bug_id".into(),
                        }),
                    }
                }
                path.pop();
            }
            Event::Eof => break,
            _ => {}
        }
    }
    sort_messages(&mut outcome.messages);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    const JSON_TWO_COMMENTS: &str = r#"{
  "bugs": [
    {"id": 17, "comments": [
      {"author": "ann", "creation_time": "2004-01-01T12:00:00Z", "text": "first"},
      {"author": "bob", "creation_time": "2004-01-02T12:00:00Z", "text": "> quoted\nsecond"}
    ]}
  ]
}"#;

    #[test]
    fn json_two_comments_on_one_bug() {
        let out = parse_bugzilla_export(JSON_TWO_COMMENTS.as_bytes(), BugzillaFormat::Json).unwrap();
        assert_eq!(out.messages.len(), 2);
        assert!(out.record_errors.is_empty());
        assert!(out.messages.iter().all(|m| m.discussion_id == "17"));
        assert_eq!(out.messages[1].text, "second");
        assert_eq!(out.messages[0].channel, Channel::BugTracker);
        assert!(out.messages[0].ts < out.messages[1].ts);
    }

    #[test]
    fn json_missing_author_is_record_error() {
        let doc = r#"{"bugs":[{"id":3,"comments":[
            {"creation_time":"2004-01-01T00:00:00Z","text":"a"},
            {"author":"bob","creation_time":"2004-01-02T00:00:00Z","text":"b"}
        ]}]}"#;
        let out = parse_bugzilla_export(doc.as_bytes(), BugzillaFormat::Json).unwrap();
        assert_eq!(out.messages.len(), 1);
        assert_eq!(out.record_errors.len(), 1);
        assert!(out.record_errors[0].reason.contains("author"));
    }

    #[test]
    fn json_malformed_reports_byte_offset() {
        let doc = "{\"bugs\": [\n  {\"id\": }\n]}";
        let err = parse_bugzilla_export(doc.as_bytes(), BugzillaFormat::Json).unwrap_err();
        match err {
            CorpusError::Malformed { offset, .. } => {
                // The offending token is the `}` on line 2.
                assert_eq!(doc.as_bytes()[offset], b'}');
            }
            other => panic!("expected Malformed, got {other:?}"),
        }
    }

    #[test]
    fn xml_export_parses() {
        let doc = r#"<?xml version="1.0"?>
<bugzilla>
  <bug>
    <bug_id>42</bug_id>
    <long_desc><who>ann</who><bug_when>2004-01-01 12:00:00 +0000</bug_when><thetext>hello</thetext></long_desc>
    <long_desc><who>bob</who><bug_when>2004-01-03 12:00:00 +0000</bug_when><thetext>&gt; old
reply</thetext></long_desc>
  </bug>
</bugzilla>"#;
        let out = parse_bugzilla_export(doc.as_bytes(), BugzillaFormat::Xml).unwrap();
        assert_eq!(out.messages.len(), 2);
        assert_eq!(out.messages[0].discussion_id, "42");
        assert_eq!(out.messages[1].text, "reply");
    }

    #[test]
    fn xml_missing_when_is_record_error() {
        let doc = r#"<bugzilla><bug><bug_id>1</bug_id>
            <long_desc><who>ann</who><thetext>x</thetext></long_desc>
        </bug></bugzilla>"#;
        let out = parse_bugzilla_export(doc.as_bytes(), BugzillaFormat::Xml).unwrap();
        assert!(out.messages.is_empty());
        assert_eq!(out.record_errors.len(), 1);
    }

    #[test]
    fn timestamp_variants() {
        assert_eq!(
            parse_timestamp("1970-01-01T00:00:10Z"),
            Some(10)
        );
        assert_eq!(
            parse_timestamp("1970-01-01 01:00:00 +0100"),
            Some(0)
        );
        assert_eq!(parse_timestamp("not a date"), None);
    }
}
