use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{collect_block, push_block};
use crate::clock::{format_timestamp, parse_timestamp};
use crate::error::ParseError;

const ENTRY_PREFIX: &str = "# COMMIT ";
const PURPOSE: &str = "## Branch Purpose";
const PROGRESS: &str = "## Previous Progress Summary";
const CONTRIBUTION: &str = "## This Commit Contribution";
const HEADINGS: [&str; 3] = [PURPOSE, PROGRESS, CONTRIBUTION];

/// One milestone record in a branch's `commit.md`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitEntry {
    pub id: String,
    #[serde(with = "crate::clock::rfc3339")]
    pub timestamp: DateTime<Utc>,
    pub message: String,
    pub branch_purpose: String,
    pub previous_progress: String,
    pub contribution: String,
}

/// First 8 hex chars of SHA-256 over the NUL-joined inputs.
pub fn compute_commit_id(parent_id: &str, timestamp: &DateTime<Utc>, message: &str, contribution: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(parent_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(format_timestamp(timestamp).as_bytes());
    hasher.update([0u8]);
    hasher.update(message.as_bytes());
    hasher.update([0u8]);
    hasher.update(contribution.as_bytes());
    let digest = hasher.finalize();
    digest[..4].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn render_commit_entry(entry: &CommitEntry) -> String {
    let mut out = format!(
        "{ENTRY_PREFIX}{} | {} | {}\n",
        entry.id,
        format_timestamp(&entry.timestamp),
        entry.message
    );
    let blocks = [&entry.branch_purpose, &entry.previous_progress, &entry.contribution];
    for (i, (heading, block)) in HEADINGS.iter().zip(blocks).enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(heading);
        out.push('\n');
        push_block(&mut out, block);
    }
    out
}

pub fn render_commit_file(entries: &[CommitEntry]) -> String {
    entries.iter().map(render_commit_entry).collect::<Vec<_>>().join("\n")
}

struct PendingEntry<'a> {
    header_line: usize,
    id: String,
    timestamp: DateTime<Utc>,
    message: String,
    blocks: Vec<Vec<&'a str>>,
}

impl PendingEntry<'_> {
    fn finish(self) -> Result<CommitEntry, ParseError> {
        if self.blocks.len() < HEADINGS.len() {
            return Err(ParseError::new(
                self.header_line,
                format!("commit {} is missing `{}`", self.id, HEADINGS[self.blocks.len()]),
            ));
        }
        let mut blocks = self.blocks.into_iter().map(collect_block);
        Ok(CommitEntry {
            id: self.id,
            timestamp: self.timestamp,
            message: self.message,
            branch_purpose: blocks.next().unwrap_or_default(),
            previous_progress: blocks.next().unwrap_or_default(),
            contribution: blocks.next().unwrap_or_default(),
        })
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<(String, DateTime<Utc>, String), ParseError> {
    let rest = &line[ENTRY_PREFIX.len()..];
    let mut parts = rest.splitn(3, " | ");
    let (Some(id), Some(ts), Some(message)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(ParseError::new(lineno, "commit header needs `<id> | <timestamp> | <message>`"));
    };
    if id.len() != 8 || !id.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f')) {
        return Err(ParseError::new(lineno, format!("bad commit id {id:?}")));
    }
    let timestamp = parse_timestamp(ts).ok_or_else(|| ParseError::new(lineno, format!("bad timestamp {ts:?}")))?;
    Ok((id.to_owned(), timestamp, message.to_owned()))
}

/// Parses `commit.md`, oldest entry first.
pub fn parse_commit_file(text: &str) -> Result<Vec<CommitEntry>, ParseError> {
    let mut entries = Vec::new();
    let mut pending: Option<PendingEntry<'_>> = None;

    for (idx, line) in text.split('\n').enumerate() {
        let lineno = idx + 1;
        if line.starts_with(ENTRY_PREFIX) {
            if let Some(p) = pending.take() {
                entries.push(p.finish()?);
            }
            let (id, timestamp, message) = parse_header(line, lineno)?;
            pending = Some(PendingEntry {
                header_line: lineno,
                id,
                timestamp,
                message,
                blocks: Vec::new(),
            });
            continue;
        }
        match pending.as_mut() {
            None if line.is_empty() => {}
            None => return Err(ParseError::new(lineno, "text before first commit header")),
            Some(p) => {
                let next = p.blocks.len();
                if next < HEADINGS.len() && line == HEADINGS[next] {
                    p.blocks.push(Vec::new());
                } else if let Some(block) = p.blocks.last_mut() {
                    block.push(line);
                } else if !line.is_empty() {
                    return Err(ParseError::new(lineno, format!("expected `{PURPOSE}`")));
                }
            }
        }
    }
    if let Some(p) = pending {
        entries.push(p.finish()?);
    }
    Ok(entries)
}
