//! CONTEXT: status snapshot, branch view, commit lookup, log tail, metadata
//! segment, and cursor-based scrolling. Nothing here writes to disk.

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine as _;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{GccError, Result};
use crate::model::{physical_lines_owned, CommitEntry, Milestone, Tree};
use crate::ops::MERGED_SEGMENT;
use crate::repo::Repository;
use crate::store;

pub const COMMIT_PAGE: usize = 10;
pub const LOG_PAGE: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Commits,
    Log,
}

impl ViewKind {
    pub fn page_size(self) -> usize {
        match self {
            ViewKind::Commits => COMMIT_PAGE,
            ViewKind::Log => LOG_PAGE,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            ViewKind::Commits => "commits",
            ViewKind::Log => "log",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Toward older content.
    Up,
    /// Toward newer content.
    Down,
}

/// Position of a window over a branch's commits or log lines. Items are
/// indexed oldest-first; the window is `[start, start + size)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cursor {
    pub view: ViewKind,
    pub branch: String,
    pub start: usize,
    pub size: usize,
    /// Digest of the underlying file when the cursor was issued.
    pub fingerprint: String,
}

impl Cursor {
    pub fn token(&self) -> String {
        let raw = format!(
            "{}:{}:{}:{}:{}",
            self.view.as_str(),
            self.branch,
            self.start,
            self.size,
            self.fingerprint
        );
        URL_SAFE_NO_PAD.encode(raw)
    }

    pub fn from_token(token: &str) -> Result<Self> {
        let bad = || GccError::BadRequest(format!("malformed cursor {token:?}"));
        let raw = URL_SAFE_NO_PAD.decode(token.trim()).map_err(|_| bad())?;
        let raw = String::from_utf8(raw).map_err(|_| bad())?;
        let parts: Vec<&str> = raw.split(':').collect();
        let [view, branch, start, size, fingerprint] = parts[..] else {
            return Err(bad());
        };
        let view = match view {
            "commits" => ViewKind::Commits,
            "log" => ViewKind::Log,
            _ => return Err(bad()),
        };
        if !store::is_valid_branch_name(branch) {
            return Err(bad());
        }
        Ok(Self {
            view,
            branch: branch.to_owned(),
            start: start.parse().map_err(|_| bad())?,
            size: size.parse().map_err(|_| bad())?,
            fingerprint: fingerprint.to_owned(),
        })
    }
}

impl Serialize for Cursor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for Cursor {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let token = String::deserialize(d)?;
        Cursor::from_token(&token).map_err(serde::de::Error::custom)
    }
}

fn fingerprint(bytes: &[u8]) -> String {
    Sha256::digest(bytes)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Newest full page, or everything when shorter.
fn initial_window(total: usize, page: usize) -> (usize, usize) {
    let start = total.saturating_sub(page);
    (start, total - start)
}

/// Shifts a window by one page; returns `(start, size, at_edge)`. At a
/// boundary the window is unchanged. The final older window may be partial
/// so that windows never overlap.
pub(crate) fn shift_window(start: usize, size: usize, total: usize, page: usize, dir: Direction) -> (usize, usize, bool) {
    match dir {
        Direction::Up => {
            if start == 0 {
                return (start, size, true);
            }
            let new_start = start.saturating_sub(page);
            (new_start, start - new_start, new_start == 0)
        }
        Direction::Down => {
            let end = start + size;
            if end >= total {
                return (start, size, true);
            }
            let new_size = page.min(total - end);
            (end, new_size, end + new_size == total)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchStatus {
    pub name: String,
    pub merged: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatusSnapshot {
    pub goal: String,
    pub milestones: Vec<Milestone>,
    pub branches: Vec<BranchStatus>,
    pub head: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitSummary {
    pub id: String,
    #[serde(with = "crate::clock::rfc3339")]
    pub timestamp: DateTime<Utc>,
    pub message: String,
}

impl From<&CommitEntry> for CommitSummary {
    fn from(e: &CommitEntry) -> Self {
        Self {
            id: e.id.clone(),
            timestamp: e.timestamp,
            message: e.message.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BranchView {
    pub branch: String,
    pub purpose: String,
    pub progress: String,
    pub total_commits: usize,
    /// Newest first.
    pub commits: Vec<CommitSummary>,
    pub cursor: Cursor,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CommitLookup {
    pub branch: String,
    pub entry: CommitEntry,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogView {
    pub branch: String,
    pub total_lines: usize,
    /// 1-based number of the first returned line.
    pub first_line: usize,
    pub lines: Vec<String>,
    pub cursor: Cursor,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowItems {
    /// Newest first, like the branch view.
    Commits(Vec<CommitSummary>),
    /// File order.
    Lines(Vec<String>),
}

impl WindowItems {
    pub fn len(&self) -> usize {
        match self {
            WindowItems::Commits(c) => c.len(),
            WindowItems::Lines(l) => l.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScrollPage {
    pub branch: String,
    pub view: ViewKind,
    pub total: usize,
    /// 1-based position of the window's oldest item.
    pub first: usize,
    pub items: WindowItems,
    pub cursor: Cursor,
    pub at_edge: bool,
}

fn commit_window(entries: &[CommitEntry], start: usize, size: usize) -> Vec<CommitSummary> {
    entries[start..start + size].iter().rev().map(CommitSummary::from).collect()
}

impl Repository {
    /// `git status`-style overview: roadmap progress and the branch list.
    pub fn context_status(&self) -> Result<StatusSnapshot> {
        let roadmap = self.read_roadmap()?;
        let mut branches = Vec::new();
        for name in self.branches()? {
            let merged = self.read_metadata(&name)?.get(MERGED_SEGMENT).is_some();
            branches.push(BranchStatus { name, merged });
        }
        Ok(StatusSnapshot {
            goal: roadmap.goal,
            milestones: roadmap.milestones,
            branches,
            head: self.head()?,
        })
    }

    fn commit_source(&self, branch: &str) -> Result<(Vec<CommitEntry>, String)> {
        let bp = self.existing_branch(branch)?;
        let bytes = std::fs::read(&bp.commit_file)?;
        Ok((self.read_commits(branch)?, fingerprint(&bytes)))
    }

    fn log_source(&self, branch: &str) -> Result<(Vec<String>, String)> {
        let text = self.read_log_text(branch)?;
        let fp = fingerprint(text.as_bytes());
        Ok((physical_lines_owned(&text), fp))
    }

    /// Purpose and progress from the latest entry plus the newest page of commits.
    pub fn context_branch(&self, branch: &str) -> Result<BranchView> {
        let (entries, fp) = self.commit_source(branch)?;
        let (start, size) = initial_window(entries.len(), COMMIT_PAGE);
        let latest = entries.last();
        Ok(BranchView {
            branch: branch.to_owned(),
            purpose: latest.map(|e| e.branch_purpose.clone()).unwrap_or_default(),
            progress: self.progress_of(latest),
            total_commits: entries.len(),
            commits: commit_window(&entries, start, size),
            cursor: Cursor {
                view: ViewKind::Commits,
                branch: branch.to_owned(),
                start,
                size,
                fingerprint: fp,
            },
        })
    }

    /// Full entry for an 8-hex id, searched across every branch.
    pub fn context_commit(&self, id: &str) -> Result<CommitLookup> {
        let mut found = Vec::new();
        for branch in self.branches()? {
            for entry in self.read_commits(&branch)? {
                if entry.id == id {
                    found.push(CommitLookup {
                        branch: branch.clone(),
                        entry,
                    });
                }
            }
        }
        match found.len() {
            0 => Err(GccError::UnknownCommit(id.to_owned())),
            1 => Ok(found.remove(0)),
            _ => Err(GccError::AmbiguousCommit {
                id: id.to_owned(),
                branches: found.into_iter().map(|f| f.branch).collect(),
            }),
        }
    }

    /// Last 20 physical lines of a branch's `log.md` (HEAD by default).
    pub fn context_log(&self, branch: Option<&str>) -> Result<LogView> {
        let branch = match branch {
            Some(b) => b.to_owned(),
            None => self.head()?,
        };
        let (lines, fp) = self.log_source(&branch)?;
        let (start, size) = initial_window(lines.len(), LOG_PAGE);
        Ok(LogView {
            branch: branch.clone(),
            total_lines: lines.len(),
            first_line: start + 1,
            lines: lines[start..start + size].to_vec(),
            cursor: Cursor {
                view: ViewKind::Log,
                branch,
                start,
                size,
                fingerprint: fp,
            },
        })
    }

    pub fn context_metadata(&self, segment: &str, branch: Option<&str>) -> Result<Tree> {
        let branch = match branch {
            Some(b) => b.to_owned(),
            None => self.head()?,
        };
        self.read_metadata(&branch)?
            .segments
            .shift_remove(segment)
            .ok_or_else(|| GccError::UnknownSegment(segment.to_owned()))
    }

    /// Moves a cursor one page toward older (`Up`) or newer (`Down`) content.
    pub fn scroll(&self, cursor: &Cursor, direction: Direction) -> Result<ScrollPage> {
        let page = cursor.view.page_size();
        let check = |total: usize, fp: &str| -> Result<()> {
            if fp != cursor.fingerprint {
                return Err(GccError::StaleCursor(cursor.branch.clone()));
            }
            if cursor.size > page || cursor.start + cursor.size > total {
                return Err(GccError::BadRequest("cursor window out of range".into()));
            }
            Ok(())
        };
        let (total, make_items): (usize, Box<dyn Fn(usize, usize) -> WindowItems>) = match cursor.view {
            ViewKind::Commits => {
                let (entries, fp) = self.commit_source(&cursor.branch)?;
                check(entries.len(), &fp)?;
                (entries.len(), Box::new(move |s, n| WindowItems::Commits(commit_window(&entries, s, n))))
            }
            ViewKind::Log => {
                let (lines, fp) = self.log_source(&cursor.branch)?;
                check(lines.len(), &fp)?;
                (lines.len(), Box::new(move |s, n| WindowItems::Lines(lines[s..s + n].to_vec())))
            }
        };
        let (start, size, at_edge) = shift_window(cursor.start, cursor.size, total, page, direction);
        Ok(ScrollPage {
            branch: cursor.branch.clone(),
            view: cursor.view,
            total,
            first: start + 1,
            items: make_items(start, size),
            cursor: Cursor {
                start,
                size,
                ..cursor.clone()
            },
            at_edge,
        })
    }
}
