//! Mutating commands: OTA appends, COMMIT, BRANCH, MERGE, CHECKOUT, roadmap
//! revision and metadata updates. Each runs under the repository lock.

use std::fs;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointRecord};
use crate::clock::format_timestamp;
use crate::error::{GccError, Result};
use crate::model::{
    compute_commit_id, parse_log, render_commit_entry, render_metadata, render_ota, render_roadmap, CommitEntry,
    OtaRecord, Roadmap, Tree,
};
use crate::model::{origin_close_tag, origin_open_tag};
use crate::repo::Repository;
use crate::store::{self, validate_branch_name, BranchPaths};

pub const BOOTSTRAP_MESSAGE: &str = "branch created";
pub const MERGED_SEGMENT: &str = "merged";
pub const PRE_MERGE_THOUGHT: &str = "pre-merge context retrieval";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRequest {
    pub message: String,
    #[serde(default)]
    pub contribution: String,
    #[serde(default)]
    pub revise_roadmap: Option<Roadmap>,
    #[serde(default)]
    pub metadata_updates: Option<IndexMap<String, Tree>>,
}

impl CommitRequest {
    pub fn new(message: impl Into<String>, contribution: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            contribution: contribution.into(),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeRequest {
    pub target: String,
    #[serde(default)]
    pub synthesis: String,
    #[serde(default)]
    pub updated_purpose: Option<String>,
    #[serde(default)]
    pub roadmap_update: Option<Roadmap>,
}

impl MergeRequest {
    pub fn new(target: impl Into<String>, synthesis: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            synthesis: synthesis.into(),
            ..Self::default()
        }
    }
}

fn validate_message(message: &str) -> Result<()> {
    if message.trim().is_empty() || message.contains(['\n', '\r']) {
        return Err(GccError::EmptyMessage);
    }
    Ok(())
}

fn validate_roadmap(roadmap: Option<&Roadmap>) -> Result<()> {
    match roadmap {
        Some(r) => r.validate().map_err(GccError::BadRequest),
        None => Ok(()),
    }
}

/// Appends `chunk` after `existing`, inserting a newline if `existing` lacks one.
fn append_text(existing: &str, chunk: &str) -> String {
    let mut out = String::with_capacity(existing.len() + chunk.len() + 1);
    out.push_str(existing);
    if !existing.is_empty() && !existing.ends_with('\n') {
        out.push('\n');
    }
    out.push_str(chunk);
    out
}

fn append_entry(commit_md: &str, entry: &CommitEntry) -> String {
    let rendered = render_commit_entry(entry);
    if commit_md.is_empty() {
        rendered
    } else {
        append_text(commit_md, &format!("\n{rendered}"))
    }
}

impl Repository {
    fn next_native_seq(records: &[OtaRecord]) -> u64 {
        records
            .iter()
            .filter(|r| r.origin.is_none())
            .map(|r| r.seq)
            .max()
            .unwrap_or(0)
            + 1
    }

    fn append_ota_unlocked(&self, branch: &BranchPaths, observation: &str, thought: &str, action: &str) -> Result<OtaRecord> {
        let text = store::read_text(&branch.log_file)?;
        let records = parse_log(&text).map_err(|e| GccError::parse(format!("branches/{}/log.md", branch.name), e))?;
        let record = OtaRecord {
            seq: Self::next_native_seq(&records),
            timestamp: self.clock.now(),
            observation: observation.to_owned(),
            thought: thought.to_owned(),
            action: action.to_owned(),
            origin: None,
        };
        self.write(&branch.log_file, &append_text(&text, &render_ota(&record)))?;
        Ok(record)
    }

    /// Records one Observation-Thought-Action cycle on the current branch.
    pub fn append_ota(&self, observation: &str, thought: &str, action: &str) -> Result<OtaRecord> {
        self.locked(|| {
            let head = self.head()?;
            let branch = self.existing_branch(&head)?;
            self.append_ota_unlocked(&branch, observation, thought, action)
        })
    }

    fn checkpoint(&self, commit_id: &str, message: &str) -> Result<Option<CheckpointRecord>> {
        match checkpoint::record_checkpoint(&self.paths, self.clock.as_ref(), self.vcs.as_deref(), commit_id, message) {
            Ok(record) => Ok(Some(record)),
            // The ledger line is already written; workspace mirroring is best effort.
            Err(GccError::Vcs(e)) => {
                log::warn!("workspace checkpoint failed: {e}");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn inherited_purpose(&self, latest: Option<&CommitEntry>) -> Result<String> {
        match latest {
            Some(e) => Ok(e.branch_purpose.clone()),
            None => Ok(self.read_roadmap()?.goal),
        }
    }

    /// COMMIT: appends a three-block entry to the current branch's
    /// `commit.md`, optionally revises `main.md` and metadata, then records a
    /// checkpoint.
    pub fn commit(&self, req: &CommitRequest) -> Result<CommitEntry> {
        validate_message(&req.message)?;
        validate_roadmap(req.revise_roadmap.as_ref())?;
        self.locked(|| {
            let head = self.head()?;
            let branch = self.existing_branch(&head)?;
            let commit_md = store::read_text(&branch.commit_file)?;
            let entries = self.read_commits(&head)?;
            let latest = entries.last();

            let metadata = match &req.metadata_updates {
                Some(updates) if !updates.is_empty() => {
                    let mut doc = self.read_metadata(&head)?;
                    for (segment, tree) in updates {
                        doc.set(segment.clone(), tree.clone());
                    }
                    Some(doc)
                }
                _ => None,
            };

            let timestamp = self.clock.now();
            let parent = latest.map(|e| e.id.as_str()).unwrap_or("");
            let entry = CommitEntry {
                id: compute_commit_id(parent, &timestamp, &req.message, &req.contribution),
                timestamp,
                message: req.message.clone(),
                branch_purpose: self.inherited_purpose(latest)?,
                previous_progress: self.progress_of(latest),
                contribution: req.contribution.clone(),
            };
            self.write(&branch.commit_file, &append_entry(&commit_md, &entry))?;
            if let Some(roadmap) = &req.revise_roadmap {
                self.write(&self.paths.main_file, &render_roadmap(roadmap))?;
            }
            if let Some(doc) = metadata {
                self.write(&branch.metadata_file, &render_metadata(&doc))?;
            }
            self.checkpoint(&entry.id, &entry.message)?;
            Ok(entry)
        })
    }

    /// BRANCH: creates an isolated memory sandbox and switches HEAD to it.
    pub fn branch(&self, name: &str, purpose: &str) -> Result<BranchPaths> {
        validate_branch_name(name)?;
        self.locked(|| {
            if self.paths.branch_exists(name) {
                return Err(GccError::BranchExists(name.to_owned()));
            }
            let head = self.head()?;
            let entries = self.read_commits(&head)?;
            let mut metadata = self.read_metadata(&head)?;
            metadata.segments.shift_remove(MERGED_SEGMENT);

            let timestamp = self.clock.now();
            let parent = entries.last().map(|e| e.id.as_str()).unwrap_or("");
            // The branch name stands in for the (empty) contribution so that
            // sibling branches forked in the same second get distinct ids.
            let bootstrap = CommitEntry {
                id: compute_commit_id(parent, &timestamp, BOOTSTRAP_MESSAGE, name),
                timestamp,
                message: BOOTSTRAP_MESSAGE.to_owned(),
                branch_purpose: purpose.to_owned(),
                previous_progress: String::new(),
                contribution: String::new(),
            };

            // Build under a name outside the branch charset, then rename into place.
            let staging = self.paths.branch(&format!("~{name}.tmp"));
            if staging.dir.exists() {
                fs::remove_dir_all(&staging.dir)?;
            }
            store::create_branch_files(&staging, &render_commit_entry(&bootstrap), &metadata)?;
            let target = self.paths.branch(name);
            if let Err(e) = fs::rename(&staging.dir, &target.dir) {
                let _ = fs::remove_dir_all(&staging.dir);
                return Err(e.into());
            }
            store::set_head(&self.paths, name)?;
            Ok(target)
        })
    }

    /// Switches HEAD to an existing branch.
    pub fn checkout(&self, name: &str) -> Result<()> {
        self.locked(|| store::set_head(&self.paths, name))
    }

    /// MERGE: folds `req.target`'s memory into the current branch.
    pub fn merge(&self, req: &MergeRequest) -> Result<CommitEntry> {
        validate_roadmap(req.roadmap_update.as_ref())?;
        self.locked(|| {
            let head = self.head()?;
            let target = self.existing_branch(&req.target)?;
            if req.target == head {
                return Err(GccError::SelfMerge(req.target.clone()));
            }
            let mut target_meta = self.read_metadata(&req.target)?;
            if target_meta.get(MERGED_SEGMENT).is_some() {
                return Err(GccError::AlreadyMerged(req.target.clone()));
            }
            let current = self.existing_branch(&head)?;
            let target_entries = self.read_commits(&req.target)?;
            let target_latest = target_entries.last();
            let target_purpose = target_latest.map(|e| e.branch_purpose.clone()).unwrap_or_default();
            let target_progress = self.progress_of(target_latest);
            let target_log = store::read_text(&target.log_file)?;
            parse_log(&target_log).map_err(|e| GccError::parse(format!("branches/{}/log.md", req.target), e))?;

            // Automatic CONTEXT on the target, persisted in the current log.
            let snapshot = format!(
                "CONTEXT --branch {}\nPurpose: {}\nProgress: {}\nCommits: {}",
                req.target,
                target_purpose,
                target_progress,
                target_entries.len()
            );
            self.append_ota_unlocked(&current, &snapshot, PRE_MERGE_THOUGHT, &format!("MERGE {}", req.target))?;

            let commit_md = store::read_text(&current.commit_file)?;
            let entries = self.read_commits(&head)?;
            let latest = entries.last();
            let timestamp = self.clock.now();
            let message = format!("MERGE {}", req.target);
            let previous_progress = self.summarizer.merge(&self.progress_of(latest), &target_progress).text;
            let branch_purpose = match &req.updated_purpose {
                Some(p) => p.clone(),
                None => self.inherited_purpose(latest)?,
            };
            let parent = latest.map(|e| e.id.as_str()).unwrap_or("");
            let entry = CommitEntry {
                id: compute_commit_id(parent, &timestamp, &message, &req.synthesis),
                timestamp,
                message,
                branch_purpose,
                previous_progress,
                contribution: req.synthesis.clone(),
            };

            let mut block = origin_open_tag(&req.target);
            block.push('\n');
            block = append_text(&block, &target_log);
            block = append_text(&block, &origin_close_tag(&req.target));
            block.push('\n');
            let current_log = store::read_text(&current.log_file)?;

            self.write(&current.commit_file, &append_entry(&commit_md, &entry))?;
            self.write(&current.log_file, &append_text(&current_log, &block))?;
            if let Some(roadmap) = &req.roadmap_update {
                self.write(&self.paths.main_file, &render_roadmap(roadmap))?;
            }
            let mut flag = IndexMap::new();
            flag.insert("into".to_owned(), Tree::scalar(head.clone()));
            flag.insert("at".to_owned(), Tree::scalar(format_timestamp(&timestamp)));
            target_meta.set(MERGED_SEGMENT, Tree::Map(flag));
            self.write(&target.metadata_file, &render_metadata(&target_meta))?;
            self.checkpoint(&entry.id, &entry.message)?;
            Ok(entry)
        })
    }

    pub fn update_roadmap(&self, roadmap: &Roadmap) -> Result<()> {
        validate_roadmap(Some(roadmap))?;
        self.locked(|| self.write(&self.paths.main_file, &render_roadmap(roadmap)))
    }

    /// Creates or replaces one segment of the current branch's `metadata.yaml`.
    pub fn set_metadata_segment(&self, segment: &str, tree: Tree) -> Result<()> {
        if segment.is_empty() {
            return Err(GccError::BadRequest("segment name must not be empty".into()));
        }
        self.locked(|| {
            let head = self.head()?;
            let branch = self.existing_branch(&head)?;
            let mut doc = self.read_metadata(&head)?;
            doc.set(segment, tree);
            self.write(&branch.metadata_file, &render_metadata(&doc))
        })
    }
}
