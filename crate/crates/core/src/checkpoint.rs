//! Durable mirror of every memory commit and merge: an append-only ledger in
//! `.GCC/checkpoints.log`, plus an optional workspace version-control commit.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::process::Command;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::{format_timestamp, parse_timestamp, Clock};
use crate::error::{GccError, ParseError, Result};
use crate::model::parse_commit_file;
use crate::store::RepoPaths;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    #[serde(with = "crate::clock::rfc3339")]
    pub timestamp: DateTime<Utc>,
    pub commit_id: String,
    pub vcs_ref: Option<String>,
    pub message: String,
}

impl CheckpointRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}\n",
            format_timestamp(&self.timestamp),
            self.commit_id,
            self.vcs_ref.as_deref().unwrap_or("-"),
            self.message
        )
    }

    fn from_line(line: &str, lineno: usize) -> Result<Self, ParseError> {
        let mut fields = line.splitn(4, '\t');
        let (Some(ts), Some(id), Some(vcs), Some(message)) = (fields.next(), fields.next(), fields.next(), fields.next())
        else {
            return Err(ParseError::new(lineno, "expected four tab-separated fields"));
        };
        let timestamp = parse_timestamp(ts).ok_or_else(|| ParseError::new(lineno, format!("bad timestamp {ts:?}")))?;
        Ok(Self {
            timestamp,
            commit_id: id.to_owned(),
            vcs_ref: (vcs != "-").then(|| vcs.to_owned()),
            message: message.to_owned(),
        })
    }
}

/// Stages everything in the workspace and commits it.
pub trait VcsAdapter: Send + Sync {
    /// `Ok(None)` when the workspace is not under version control.
    fn commit_all(&self, workspace: &Path, message: &str) -> Result<Option<String>, String>;
}

/// Shells out to `git` in the workspace root.
#[derive(Clone, Copy, Debug, Default)]
pub struct GitAdapter;

fn git(workspace: &Path, args: &[&str]) -> io::Result<std::process::Output> {
    Command::new("git").arg("-C").arg(workspace).args(args).output()
}

impl VcsAdapter for GitAdapter {
    fn commit_all(&self, workspace: &Path, message: &str) -> Result<Option<String>, String> {
        match git(workspace, &["rev-parse", "--is-inside-work-tree"]) {
            Ok(out) if out.status.success() => {}
            _ => return Ok(None),
        }
        let run = |args: &[&str]| -> Result<String, String> {
            let out = git(workspace, args).map_err(|e| e.to_string())?;
            if out.status.success() {
                Ok(String::from_utf8_lossy(&out.stdout).trim().to_owned())
            } else {
                Err(String::from_utf8_lossy(&out.stderr).trim().to_owned())
            }
        };
        run(&["add", "-A"])?;
        run(&["commit", "--allow-empty", "--no-verify", "-q", "-m", message])?;
        run(&["rev-parse", "HEAD"]).map(Some)
    }
}

/// In-memory adapter that records commit messages.
#[derive(Debug, Default)]
pub struct FakeVcs {
    history: Mutex<Vec<String>>,
    fail: bool,
}

impl FakeVcs {
    pub fn failing() -> Self {
        Self {
            history: Mutex::default(),
            fail: true,
        }
    }

    pub fn history(&self) -> Vec<String> {
        self.history.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl VcsAdapter for FakeVcs {
    fn commit_all(&self, _workspace: &Path, message: &str) -> Result<Option<String>, String> {
        if self.fail {
            return Err("fake adapter failure".into());
        }
        let mut history = self.history.lock().unwrap_or_else(|e| e.into_inner());
        history.push(message.to_owned());
        Ok(Some(format!("fake-{}", history.len())))
    }
}

fn commit_id_exists(paths: &RepoPaths, commit_id: &str) -> Result<bool> {
    for branch in paths.list_branches()? {
        let bp = paths.branch(&branch);
        let text = crate::store::read_text(&bp.commit_file)?;
        let entries = parse_commit_file(&text).map_err(|e| GccError::parse(bp.commit_file.display().to_string(), e))?;
        if entries.iter().any(|e| e.id == commit_id) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Appends a ledger line and, when an adapter is configured, mirrors the
/// workspace into version control. An adapter failure still writes the
/// ledger line (with no revision) and then reports [`GccError::Vcs`].
pub fn record_checkpoint(
    paths: &RepoPaths,
    clock: &dyn Clock,
    vcs: Option<&dyn VcsAdapter>,
    commit_id: &str,
    message: &str,
) -> Result<CheckpointRecord> {
    if !commit_id_exists(paths, commit_id)? {
        return Err(GccError::UnknownCommit(commit_id.to_owned()));
    }
    let (vcs_ref, failure) = match vcs.map(|v| v.commit_all(&paths.root, message)) {
        None => (None, None),
        Some(Ok(rev)) => (rev, None),
        Some(Err(e)) => (None, Some(e)),
    };
    let record = CheckpointRecord {
        timestamp: clock.now(),
        commit_id: commit_id.to_owned(),
        vcs_ref,
        message: message.to_owned(),
    };
    let mut file = OpenOptions::new().create(true).append(true).open(&paths.checkpoints_file)?;
    file.write_all(record.to_line().as_bytes())?;
    file.sync_all()?;
    match failure {
        Some(e) => Err(GccError::Vcs(e)),
        None => Ok(record),
    }
}

pub fn parse_checkpoints(text: &str) -> Result<Vec<CheckpointRecord>, ParseError> {
    text.split('\n')
        .enumerate()
        .filter(|(_, line)| !line.is_empty())
        .map(|(idx, line)| CheckpointRecord::from_line(line, idx + 1))
        .collect()
}

pub fn list_checkpoints(paths: &RepoPaths) -> Result<Vec<CheckpointRecord>> {
    let text = match fs::read_to_string(&paths.checkpoints_file) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(e.into()),
    };
    parse_checkpoints(&text).map_err(|e| GccError::parse("checkpoints.log", e))
}
