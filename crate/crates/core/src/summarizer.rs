//! Progress-summary regeneration for COMMIT and MERGE.
//!
//! The default summarizer is a deterministic concatenation with a character
//! budget. An external command can stand in for a model-written summary; any
//! failure there falls back to the default and flags the result.

use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_CHARS: usize = 2000;
pub const MIN_MAX_CHARS: usize = 200;
pub const ELISION_MARKER: &str = "\n[... elided ...]\n";
pub const SEPARATOR: &str = "\n---\n";
pub const MERGE_LABEL: &str = "[merged from branch]";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummarizerKind {
    #[default]
    Default,
    External,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummarizerSpec {
    pub kind: SummarizerKind,
    pub max_chars: usize,
    /// Run through `sh -c`; receives `<first>\0<second>` on stdin.
    pub external_command: Option<String>,
}

impl Default for SummarizerSpec {
    fn default() -> Self {
        Self {
            kind: SummarizerKind::Default,
            max_chars: DEFAULT_MAX_CHARS,
            external_command: None,
        }
    }
}

impl SummarizerSpec {
    pub fn external(command: impl Into<String>) -> Self {
        Self {
            kind: SummarizerKind::External,
            external_command: Some(command.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_chars < MIN_MAX_CHARS {
            return Err(format!("max_chars must be at least {MIN_MAX_CHARS}"));
        }
        if self.kind == SummarizerKind::External && self.external_command.is_none() {
            return Err("external summarizer needs a command".into());
        }
        Ok(())
    }

    fn budget(&self) -> usize {
        self.max_chars.max(MIN_MAX_CHARS)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Summary {
    pub text: String,
    /// Set when the external command failed and the default was used.
    pub fell_back: bool,
}

/// Keeps the first 25% and last 65% of the budget around [`ELISION_MARKER`]
/// when `text` exceeds `max_chars` characters.
pub fn apply_budget(text: String, max_chars: usize) -> String {
    let len = text.chars().count();
    if len <= max_chars {
        return text;
    }
    let head = max_chars / 4;
    let tail = max_chars * 65 / 100;
    let mut out: String = text.chars().take(head).collect();
    out.push_str(ELISION_MARKER);
    out.extend(text.chars().skip(len - tail));
    out
}

pub fn default_fold(previous: &str, contribution: &str, max_chars: usize) -> String {
    let joined = if previous.is_empty() {
        contribution.to_owned()
    } else {
        format!("{previous}{SEPARATOR}{contribution}")
    };
    apply_budget(joined, max_chars)
}

pub fn default_merge(current: &str, target: &str, max_chars: usize) -> String {
    let joined = if current.is_empty() {
        format!("{MERGE_LABEL}\n{target}")
    } else {
        format!("{current}\n{MERGE_LABEL}\n{target}")
    };
    apply_budget(joined, max_chars)
}

fn run_external(command: &str, first: &str, second: &str) -> Option<String> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .ok()?;
    let mut payload = Vec::with_capacity(first.len() + second.len() + 1);
    payload.extend_from_slice(first.as_bytes());
    payload.push(0);
    payload.extend_from_slice(second.as_bytes());
    let mut stdin = child.stdin.take()?;
    let writer = std::thread::spawn(move || stdin.write_all(&payload));
    let output = child.wait_with_output().ok()?;
    let _ = writer.join();
    if !output.status.success() {
        return None;
    }
    String::from_utf8(output.stdout).ok()
}

#[derive(Clone, Debug, Default)]
pub struct Summarizer {
    spec: SummarizerSpec,
}

impl Summarizer {
    pub fn new(spec: SummarizerSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &SummarizerSpec {
        &self.spec
    }

    fn run(&self, first: &str, second: &str, default: impl FnOnce(usize) -> String) -> Summary {
        let budget = self.spec.budget();
        if self.spec.kind == SummarizerKind::External {
            if let Some(text) = self
                .spec
                .external_command
                .as_deref()
                .and_then(|cmd| run_external(cmd, first, second))
            {
                return Summary {
                    text: apply_budget(text, budget),
                    fell_back: false,
                };
            }
            log::warn!("external summarizer failed; using default");
            return Summary {
                text: default(budget),
                fell_back: true,
            };
        }
        Summary {
            text: default(budget),
            fell_back: false,
        }
    }

    /// Rolls the previous summary forward with a commit's contribution.
    pub fn fold(&self, previous: &str, contribution: &str) -> Summary {
        self.run(previous, contribution, |b| default_fold(previous, contribution, b))
    }

    /// Combines the current branch's progress with a merged branch's.
    pub fn merge(&self, current: &str, target: &str) -> Summary {
        self.run(current, target, |b| default_merge(current, target, b))
    }
}
