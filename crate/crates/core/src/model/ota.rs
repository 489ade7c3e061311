use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::{format_timestamp, parse_timestamp};
use crate::error::ParseError;

const FIELD_TAGS: [&str; 3] = ["[O]", "[T]", "[A]"];
const CONTINUATION: &str = "    ";

/// One Observation-Thought-Action cycle in a branch's `log.md`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtaRecord {
    pub seq: u64,
    #[serde(with = "crate::clock::rfc3339")]
    pub timestamp: DateTime<Utc>,
    pub observation: String,
    pub thought: String,
    pub action: String,
    /// Branch the record was merged in from; `None` for native records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

pub(crate) fn origin_open_tag(branch: &str) -> String {
    format!("== Branch {branch} ==")
}

pub(crate) fn origin_close_tag(branch: &str) -> String {
    format!("== End Branch {branch} ==")
}

fn push_field(out: &mut String, tag: &str, text: &str) {
    let mut lines = text.split('\n');
    let first = lines.next().unwrap_or("");
    out.push_str(tag);
    if !first.is_empty() {
        out.push(' ');
        out.push_str(first);
    }
    out.push('\n');
    for line in lines {
        out.push_str(CONTINUATION);
        out.push_str(line);
        out.push('\n');
    }
}

/// Renders a single record; origin tags are a property of the surrounding log.
pub fn render_ota(record: &OtaRecord) -> String {
    let mut out = format!("=== OTA {} {} ===\n", record.seq, format_timestamp(&record.timestamp));
    push_field(&mut out, FIELD_TAGS[0], &record.observation);
    push_field(&mut out, FIELD_TAGS[1], &record.thought);
    push_field(&mut out, FIELD_TAGS[2], &record.action);
    out
}

/// Renders a record list, wrapping each run of equal non-empty origins in
/// `== Branch <name> ==` / `== End Branch <name> ==` tags.
pub fn render_log(records: &[OtaRecord]) -> String {
    let mut out = String::new();
    let mut open: Option<&str> = None;
    for record in records {
        let origin = record.origin.as_deref();
        if origin != open {
            if let Some(name) = open {
                out.push_str(&origin_close_tag(name));
                out.push('\n');
            }
            if let Some(name) = origin {
                out.push_str(&origin_open_tag(name));
                out.push('\n');
            }
            open = origin;
        }
        out.push_str(&render_ota(record));
    }
    if let Some(name) = open {
        out.push_str(&origin_close_tag(name));
        out.push('\n');
    }
    out
}

struct Pending {
    line: usize,
    seq: u64,
    timestamp: DateTime<Utc>,
    fields: Vec<String>,
    origin: Option<String>,
}

impl Pending {
    fn finish(self) -> Result<OtaRecord, ParseError> {
        if self.fields.len() != 3 {
            return Err(ParseError::new(
                self.line,
                format!("OTA record {} is missing {}", self.seq, FIELD_TAGS[self.fields.len()]),
            ));
        }
        let mut fields = self.fields.into_iter();
        Ok(OtaRecord {
            seq: self.seq,
            timestamp: self.timestamp,
            observation: fields.next().unwrap_or_default(),
            thought: fields.next().unwrap_or_default(),
            action: fields.next().unwrap_or_default(),
            origin: self.origin,
        })
    }
}

fn parse_record_header(line: &str, lineno: usize) -> Result<(u64, DateTime<Utc>), ParseError> {
    let bad = || ParseError::new(lineno, format!("malformed OTA header {line:?}"));
    let inner = line
        .strip_prefix("=== OTA ")
        .and_then(|s| s.strip_suffix(" ==="))
        .ok_or_else(bad)?;
    let (seq, ts) = inner.split_once(' ').ok_or_else(bad)?;
    let seq: u64 = seq.parse().map_err(|_| bad())?;
    if seq == 0 {
        return Err(bad());
    }
    let timestamp = parse_timestamp(ts).ok_or_else(bad)?;
    Ok((seq, timestamp))
}

fn flush(pending: &mut Option<Pending>, records: &mut Vec<OtaRecord>) -> Result<(), ParseError> {
    if let Some(p) = pending.take() {
        records.push(p.finish()?);
    }
    Ok(())
}

/// Parses `log.md`, oldest record first. Origin tags nest; a record's origin
/// is the innermost open tag.
pub fn parse_log(text: &str) -> Result<Vec<OtaRecord>, ParseError> {
    let mut records = Vec::new();
    let mut origins: Vec<String> = Vec::new();
    let mut pending: Option<Pending> = None;

    for (idx, line) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        if line.starts_with("=== OTA ") {
            flush(&mut pending, &mut records)?;
            let (seq, timestamp) = parse_record_header(line, lineno)?;
            pending = Some(Pending {
                line: lineno,
                seq,
                timestamp,
                fields: Vec::with_capacity(3),
                origin: origins.last().cloned(),
            });
        } else if let Some(name) = line.strip_prefix("== End Branch ").and_then(|s| s.strip_suffix(" ==")) {
            flush(&mut pending, &mut records)?;
            if origins.last().map(String::as_str) != Some(name) {
                return Err(ParseError::new(lineno, format!("unmatched end tag for {name}")));
            }
            origins.pop();
        } else if let Some(name) = line.strip_prefix("== Branch ").and_then(|s| s.strip_suffix(" ==")) {
            flush(&mut pending, &mut records)?;
            origins.push(name.to_owned());
        } else if let Some(rest) = line.strip_prefix(CONTINUATION) {
            match pending.as_mut().and_then(|p| p.fields.last_mut()) {
                Some(field) => {
                    field.push('\n');
                    field.push_str(rest);
                }
                None => return Err(ParseError::new(lineno, "continuation line outside a record field")),
            }
        } else if line.is_empty() {
            flush(&mut pending, &mut records)?;
        } else {
            let Some(p) = pending.as_mut() else {
                return Err(ParseError::new(lineno, format!("unexpected line {line:?}")));
            };
            let Some(tag) = FIELD_TAGS.get(p.fields.len()) else {
                return Err(ParseError::new(lineno, format!("unexpected line {line:?}")));
            };
            let text = if line == *tag {
                ""
            } else if let Some(rest) = line.strip_prefix(tag).and_then(|s| s.strip_prefix(' ')) {
                rest
            } else {
                return Err(ParseError::new(lineno, format!("expected {tag} line")));
            };
            p.fields.push(text.to_owned());
        }
    }
    flush(&mut pending, &mut records)?;
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(seq: u64, origin: Option<&str>) -> OtaRecord {
        OtaRecord {
            seq,
            timestamp: parse_timestamp("2025-01-01T00:00:00Z").unwrap(),
            observation: format!("saw {seq}"),
            thought: "think".into(),
            action: "act".into(),
            origin: origin.map(str::to_owned),
        }
    }

    #[test]
    fn three_records_in_order() {
        let log = render_log(&[rec(1, None), rec(2, None), rec(3, None)]);
        let seqs: Vec<u64> = parse_log(&log).unwrap().iter().map(|r| r.seq).collect();
        assert_eq!(seqs, [1, 2, 3]);
    }

    #[test]
    fn origin_tag_marks_following_records() {
        let text = format!(
            "{}== Branch A ==\n{}{}",
            render_ota(&rec(1, None)),
            render_ota(&rec(1, None)),
            render_ota(&rec(2, None))
        );
        let records = parse_log(&text).unwrap();
        assert_eq!(records[0].origin, None);
        assert_eq!(records[1].origin.as_deref(), Some("A"));
        assert_eq!(records[2].origin.as_deref(), Some("A"));
    }

    #[test]
    fn end_tag_restores_native_origin() {
        let log = render_log(&[rec(1, None), rec(1, Some("A")), rec(2, None)]);
        assert!(log.contains("== End Branch A ==\n"));
        assert_eq!(parse_log(&log).unwrap()[2].origin, None);
    }

    #[test]
    fn nested_tags_use_innermost_origin() {
        let text = format!(
            "== Branch B ==\n{}== Branch C ==\n{}== End Branch C ==\n{}== End Branch B ==\n",
            render_ota(&rec(1, None)),
            render_ota(&rec(1, None)),
            render_ota(&rec(2, None))
        );
        let origins: Vec<_> = parse_log(&text).unwrap().into_iter().map(|r| r.origin).collect();
        assert_eq!(origins, [Some("B".into()), Some("C".into()), Some("B".into())]);
    }

    #[test]
    fn empty_fields_and_multiline() {
        let mut r = rec(1, None);
        r.observation = String::new();
        r.thought = "\nsecond".into();
        r.action = "a\n\n  indented".into();
        let text = render_ota(&r);
        assert!(text.contains("[O]\n"));
        assert_eq!(parse_log(&text).unwrap(), vec![r]);
    }

    #[test]
    fn malformed_header_is_rejected() {
        assert!(parse_log("=== OTA x 2025-01-01T00:00:00Z ===\n").is_err());
        assert!(parse_log("=== OTA 0 2025-01-01T00:00:00Z ===\n[O]\n[T]\n[A]\n").is_err());
        assert!(parse_log("=== OTA 1 2025-01-01T00:00:00Z ===\n[O]\n[A]\n").is_err());
        assert!(parse_log("stray\n").is_err());
    }
}
