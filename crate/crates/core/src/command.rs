//! One command vocabulary shared by the CLI, the tool server, and the replay
//! harness: parse a request into a [`Command`], run it in a [`Session`], and
//! render the [`Outcome`] as JSON or plain text.

use std::path::PathBuf;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::checkpoint::{self, CheckpointRecord, VcsAdapter};
use crate::clock::{format_timestamp, Clock, SystemClock};
use crate::error::{GccError, Result};
use crate::model::{render_commit_entry, render_metadata, render_ota, render_roadmap, CommitEntry, MetadataDoc, OtaRecord, Roadmap, Tree};
use crate::ops::{CommitRequest, MergeRequest};
use crate::repo::Repository;
use crate::retrieve::{BranchView, CommitLookup, CommitSummary, Cursor, Direction, LogView, ScrollPage, StatusSnapshot, WindowItems};
use crate::store::LockConfig;
use crate::summarizer::SummarizerSpec;

pub const OPS: [&str; 11] = [
    "init",
    "ota",
    "commit",
    "branch",
    "checkout",
    "merge",
    "context",
    "scroll",
    "checkpoints",
    "set_metadata",
    "update_roadmap",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ContextQuery {
    Status,
    Branch(String),
    Commit(String),
    Log(Option<String>),
    Metadata { segment: String, branch: Option<String> },
}

impl ContextQuery {
    /// Resolves the CONTEXT flag combination. `branch` selects the branch
    /// view alone, or scopes `--log` / `--metadata`.
    pub fn resolve(branch: Option<String>, commit: Option<String>, log: bool, metadata: Option<String>) -> Result<Self> {
        let modes = usize::from(commit.is_some()) + usize::from(log) + usize::from(metadata.is_some());
        if modes > 1 {
            return Err(GccError::BadRequest("choose one of commit, log, metadata".into()));
        }
        Ok(match (commit, log, metadata) {
            (Some(id), _, _) if branch.is_some() => {
                return Err(GccError::BadRequest(format!("commit {id} cannot be scoped to a branch")))
            }
            (Some(id), _, _) => ContextQuery::Commit(id),
            (None, true, _) => ContextQuery::Log(branch),
            (None, false, Some(segment)) => ContextQuery::Metadata { segment, branch },
            (None, false, None) => match branch {
                Some(b) => ContextQuery::Branch(b),
                None => ContextQuery::Status,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Init { goal: String, todo: Vec<String> },
    Ota { observation: String, thought: String, action: String },
    Commit(CommitRequest),
    Branch { name: String, purpose: String },
    Checkout { name: String },
    Merge(MergeRequest),
    Context(ContextQuery),
    Scroll { cursor: String, direction: Direction },
    Checkpoints,
    SetMetadata { segment: String, tree: Tree },
    UpdateRoadmap(Roadmap),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InitArgs {
    goal: String,
    #[serde(default)]
    todo: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct OtaArgs {
    #[serde(default)]
    observation: String,
    #[serde(default)]
    thought: String,
    #[serde(default)]
    action: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CommitArgs {
    message: String,
    #[serde(default)]
    contribution: String,
    #[serde(default, alias = "revise_roadmap")]
    roadmap: Option<Roadmap>,
    #[serde(default, alias = "metadata_updates")]
    metadata: Option<IndexMap<String, Tree>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchArgs {
    name: String,
    #[serde(default)]
    purpose: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckoutArgs {
    name: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MergeArgs {
    target: String,
    #[serde(default)]
    synthesis: String,
    #[serde(default, alias = "updated_purpose")]
    purpose: Option<String>,
    #[serde(default, alias = "roadmap_update")]
    roadmap: Option<Roadmap>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextArgs {
    #[serde(default)]
    branch: Option<String>,
    #[serde(default)]
    commit: Option<String>,
    #[serde(default)]
    log: bool,
    #[serde(default)]
    metadata: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScrollArgs {
    cursor: String,
    direction: Direction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SetMetadataArgs {
    segment: String,
    tree: Tree,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmptyArgs {}

fn args<T: serde::de::DeserializeOwned>(op: &str, value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| GccError::BadRequest(format!("{op}: {e}")))
}

impl Command {
    /// Builds a command from an op name and a JSON `args` object.
    pub fn from_json(op: &str, value: Value) -> Result<Self> {
        if !OPS.contains(&op) {
            return Err(GccError::UnknownOp(op.to_owned()));
        }
        let value = match value {
            Value::Null => Value::Object(Default::default()),
            v @ Value::Object(_) => v,
            _ => return Err(GccError::BadRequest("args must be an object".into())),
        };
        Ok(match op {
            "init" => {
                let a: InitArgs = args(op, value)?;
                Command::Init { goal: a.goal, todo: a.todo }
            }
            "ota" => {
                let a: OtaArgs = args(op, value)?;
                Command::Ota {
                    observation: a.observation,
                    thought: a.thought,
                    action: a.action,
                }
            }
            "commit" => {
                let a: CommitArgs = args(op, value)?;
                Command::Commit(CommitRequest {
                    message: a.message,
                    contribution: a.contribution,
                    revise_roadmap: a.roadmap,
                    metadata_updates: a.metadata,
                })
            }
            "branch" => {
                let a: BranchArgs = args(op, value)?;
                Command::Branch { name: a.name, purpose: a.purpose }
            }
            "checkout" => Command::Checkout { name: args::<CheckoutArgs>(op, value)?.name },
            "merge" => {
                let a: MergeArgs = args(op, value)?;
                Command::Merge(MergeRequest {
                    target: a.target,
                    synthesis: a.synthesis,
                    updated_purpose: a.purpose,
                    roadmap_update: a.roadmap,
                })
            }
            "context" => {
                let a: ContextArgs = args(op, value)?;
                Command::Context(ContextQuery::resolve(a.branch, a.commit, a.log, a.metadata)?)
            }
            "scroll" => {
                let a: ScrollArgs = args(op, value)?;
                Command::Scroll { cursor: a.cursor, direction: a.direction }
            }
            "checkpoints" => {
                args::<EmptyArgs>(op, value)?;
                Command::Checkpoints
            }
            "set_metadata" => {
                let a: SetMetadataArgs = args(op, value)?;
                Command::SetMetadata { segment: a.segment, tree: a.tree }
            }
            "update_roadmap" => {
                let roadmap = match value.get("roadmap") {
                    Some(inner) => args(op, inner.clone())?,
                    None => args(op, value)?,
                };
                Command::UpdateRoadmap(roadmap)
            }
            _ => unreachable!("op membership checked above"),
        })
    }

    /// Whether the command writes to the repository.
    pub fn is_mutating(&self) -> bool {
        !matches!(self, Command::Context(_) | Command::Scroll { .. } | Command::Checkpoints)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MetadataSegment {
    pub branch: String,
    pub segment: String,
    pub tree: Tree,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Init { head: String, branches: Vec<String> },
    Ota(OtaRecord),
    Committed(CommitEntry),
    Branched { branch: String, head: String },
    CheckedOut { head: String },
    Status(StatusSnapshot),
    BranchView(BranchView),
    CommitLookup(CommitLookup),
    Log(LogView),
    Metadata(MetadataSegment),
    Scroll(ScrollPage),
    Checkpoints { checkpoints: Vec<CheckpointRecord> },
    MetadataSet { branch: String, segment: String },
    Roadmap(Roadmap),
}

fn indented(text: &str) -> String {
    text.split('\n').map(|l| format!("  {l}\n")).collect()
}

fn push_commit_lines(out: &mut String, commits: &[CommitSummary]) {
    for c in commits {
        out.push_str(&format!("{} {} {}\n", c.id, format_timestamp(&c.timestamp), c.message));
    }
}

impl Outcome {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("outcomes serialize")
    }

    /// Stable plain-text layout used by the CLI.
    pub fn to_plain(&self) -> String {
        let mut out = String::new();
        match self {
            Outcome::Init { head, .. } => out.push_str(&format!("initialized .GCC/ on branch {head}\n")),
            Outcome::Ota(record) => out.push_str(&render_ota(record)),
            Outcome::Committed(entry) => out.push_str(&render_commit_entry(entry)),
            Outcome::Branched { branch, head } => {
                out.push_str(&format!("created branch {branch}\nHEAD is now {head}\n"))
            }
            Outcome::CheckedOut { head } => out.push_str(&format!("HEAD is now {head}\n")),
            Outcome::Status(s) => {
                out.push_str("Goal:\n");
                out.push_str(&indented(&s.goal));
                out.push_str("Milestones:\n");
                for m in &s.milestones {
                    out.push_str(&format!("  [{}] {}\n", if m.done { "x" } else { " " }, m.text));
                }
                out.push_str("Branches:\n");
                for b in &s.branches {
                    let mark = if b.name == s.head { '*' } else { ' ' };
                    let merged = if b.merged { " (merged)" } else { "" };
                    out.push_str(&format!("{mark} {}{merged}\n", b.name));
                }
            }
            Outcome::BranchView(v) => {
                out.push_str(&format!("Branch: {}\nPurpose:\n", v.branch));
                out.push_str(&indented(&v.purpose));
                out.push_str("Progress:\n");
                out.push_str(&indented(&v.progress));
                out.push_str(&format!("Commits ({} of {}, newest first):\n", v.commits.len(), v.total_commits));
                push_commit_lines(&mut out, &v.commits);
                out.push_str(&format!("cursor: {}\n", v.cursor.token()));
            }
            Outcome::CommitLookup(found) => {
                out.push_str(&format!("Branch: {}\n", found.branch));
                out.push_str(&render_commit_entry(&found.entry));
            }
            Outcome::Log(v) => {
                for line in &v.lines {
                    out.push_str(line);
                    out.push('\n');
                }
                out.push_str(&format!("cursor: {}\n", v.cursor.token()));
            }
            Outcome::Metadata(m) => {
                let mut doc = MetadataDoc::default();
                doc.set(m.segment.clone(), m.tree.clone());
                out.push_str(&render_metadata(&doc));
            }
            Outcome::Scroll(page) => {
                match &page.items {
                    WindowItems::Commits(commits) => push_commit_lines(&mut out, commits),
                    WindowItems::Lines(lines) => {
                        for line in lines {
                            out.push_str(line);
                            out.push('\n');
                        }
                    }
                }
                if page.at_edge {
                    out.push_str("at edge\n");
                }
                out.push_str(&format!("cursor: {}\n", page.cursor.token()));
            }
            Outcome::Checkpoints { checkpoints } => {
                for c in checkpoints {
                    out.push_str(&c.to_line());
                }
            }
            Outcome::MetadataSet { branch, segment } => out.push_str(&format!("set {segment} on {branch}\n")),
            Outcome::Roadmap(r) => out.push_str(&render_roadmap(r)),
        }
        out
    }
}

/// Everything needed to open the repository for one command. Holds no
/// repository state between commands.
#[derive(Clone)]
pub struct Session {
    pub root: PathBuf,
    pub clock: Arc<dyn Clock>,
    pub summarizer: SummarizerSpec,
    pub vcs: Option<Arc<dyn VcsAdapter>>,
    pub lock: LockConfig,
}

impl Session {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self {
            root: root.into(),
            clock: Arc::new(SystemClock),
            summarizer: SummarizerSpec::default(),
            vcs: None,
            lock: LockConfig::default(),
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn open(&self) -> Result<Repository> {
        let mut repo = Repository::open(&self.root)?
            .with_clock(self.clock.clone())
            .with_summarizer(self.summarizer.clone())
            .with_lock_config(self.lock.clone());
        if let Some(vcs) = &self.vcs {
            repo = repo.with_vcs(vcs.clone());
        }
        Ok(repo)
    }

    pub fn execute(&self, command: &Command) -> Result<Outcome> {
        if let Command::Init { goal, todo } = command {
            let repo = Repository::init(&self.root, goal, todo)?;
            return Ok(Outcome::Init {
                head: repo.head()?,
                branches: repo.branches()?,
            });
        }
        let repo = self.open()?;
        Ok(match command {
            Command::Init { .. } => unreachable!("handled above"),
            Command::Ota { observation, thought, action } => Outcome::Ota(repo.append_ota(observation, thought, action)?),
            Command::Commit(req) => Outcome::Committed(repo.commit(req)?),
            Command::Branch { name, purpose } => {
                repo.branch(name, purpose)?;
                Outcome::Branched {
                    branch: name.clone(),
                    head: repo.head()?,
                }
            }
            Command::Checkout { name } => {
                repo.checkout(name)?;
                Outcome::CheckedOut { head: repo.head()? }
            }
            Command::Merge(req) => Outcome::Committed(repo.merge(req)?),
            Command::Context(query) => match query {
                ContextQuery::Status => Outcome::Status(repo.context_status()?),
                ContextQuery::Branch(b) => Outcome::BranchView(repo.context_branch(b)?),
                ContextQuery::Commit(id) => Outcome::CommitLookup(repo.context_commit(id)?),
                ContextQuery::Log(b) => Outcome::Log(repo.context_log(b.as_deref())?),
                ContextQuery::Metadata { segment, branch } => {
                    let branch = match branch {
                        Some(b) => b.clone(),
                        None => repo.head()?,
                    };
                    Outcome::Metadata(MetadataSegment {
                        tree: repo.context_metadata(segment, Some(&branch))?,
                        segment: segment.clone(),
                        branch,
                    })
                }
            },
            Command::Scroll { cursor, direction } => {
                Outcome::Scroll(repo.scroll(&Cursor::from_token(cursor)?, *direction)?)
            }
            Command::Checkpoints => Outcome::Checkpoints {
                checkpoints: checkpoint::list_checkpoints(repo.paths())?,
            },
            Command::SetMetadata { segment, tree } => {
                repo.set_metadata_segment(segment, tree.clone())?;
                Outcome::MetadataSet {
                    branch: repo.head()?,
                    segment: segment.clone(),
                }
            }
            Command::UpdateRoadmap(roadmap) => {
                repo.update_roadmap(roadmap)?;
                Outcome::Roadmap(repo.read_roadmap()?)
            }
        })
    }
}
