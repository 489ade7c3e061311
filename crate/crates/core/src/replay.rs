//! Scripted sessions with a fixed clock, and the handoff check: a script
//! interrupted at any step and resumed by a fresh session must leave the
//! same `.GCC/` bytes as one uninterrupted run.
//!
//! Script files are JSON lines. The first line is the header
//! `{"version":1,"fresh":true,"clock":["2025-01-01T00:00:00Z", ...]}`; every
//! further line is a step `{"op":"commit","args":{...},"expect":{...}}`.
//! Each mutating step consumes the next clock entry.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::clock::{format_timestamp, parse_timestamp, ManualClock};
use crate::command::{Command, Session};
use crate::error::{GccError, Result};
use crate::store::{LockConfig, GCC_DIR};
use crate::toolserver::ToolResponse;

pub const SCRIPT_VERSION: u32 = 1;

const MUTATING_OPS: [&str; 8] = [
    "init",
    "ota",
    "commit",
    "branch",
    "checkout",
    "merge",
    "set_metadata",
    "update_roadmap",
];

pub fn is_mutating_op(op: &str) -> bool {
    MUTATING_OPS.contains(&op)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_subset: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub op: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub args: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
}

impl Step {
    pub fn new(op: impl Into<String>, args: Value) -> Self {
        Self {
            op: op.into(),
            args,
            expect: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    version: u32,
    fresh: bool,
    #[serde(default)]
    clock: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayScript {
    pub fresh: bool,
    pub clock: Vec<DateTime<Utc>>,
    pub steps: Vec<Step>,
}

fn script_err(msg: impl Into<String>) -> GccError {
    GccError::Script(msg.into())
}

impl ReplayScript {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or_else(|| script_err("missing header line"))?;
        let header: Header = serde_json::from_str(first).map_err(|e| script_err(format!("line 1: bad header: {e}")))?;
        if header.version != SCRIPT_VERSION {
            return Err(script_err(format!("unsupported script version {}", header.version)));
        }
        let clock = header
            .clock
            .iter()
            .map(|t| parse_timestamp(t).ok_or_else(|| script_err(format!("bad clock entry {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let steps = lines
            .map(|(n, l)| serde_json::from_str(l).map_err(|e| script_err(format!("line {}: bad step: {e}", n + 1))))
            .collect::<Result<Vec<Step>>>()?;
        Ok(Self {
            fresh: header.fresh,
            clock,
            steps,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            version: SCRIPT_VERSION,
            fresh: self.fresh,
            clock: self.clock.iter().map(format_timestamp).collect(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for step in &self.steps {
            out.push_str(&serde_json::to_string(step).expect("step serializes"));
            out.push('\n');
        }
        out
    }

    pub fn mutating_steps(&self) -> usize {
        self.steps.iter().filter(|s| is_mutating_op(&s.op)).count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.fresh && self.steps.first().map(|s| s.op.as_str()) != Some("init") {
            return Err(script_err("a fresh script must start with init"));
        }
        if self.clock.len() < self.mutating_steps() {
            return Err(script_err(format!(
                "clock has {} entries for {} mutating steps",
                self.clock.len(),
                self.mutating_steps()
            )));
        }
        if self.clock.windows(2).any(|w| w[1] < w[0]) {
            return Err(script_err("clock timestamps must be nondecreasing"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepFailure {
    /// 0-based step index.
    pub step: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayRun {
    pub transcript: Vec<ToolResponse>,
    pub digest: String,
    pub failures: Vec<StepFailure>,
}

/// `expected` matches when every object key it names matches recursively;
/// arrays and scalars must match exactly (arrays element-wise).
pub fn is_subset(expected: &Value, actual: &Value) -> bool {
    match (expected, actual) {
        (Value::Object(e), Value::Object(a)) => e.iter().all(|(k, v)| a.get(k).is_some_and(|av| is_subset(v, av))),
        (Value::Array(e), Value::Array(a)) => e.len() == a.len() && e.iter().zip(a).all(|(x, y)| is_subset(x, y)),
        _ => expected == actual,
    }
}

fn check_expect(expect: &Expect, response: &ToolResponse) -> Option<String> {
    if let Some(ok) = expect.ok {
        if ok != response.ok {
            let detail = match &response.error {
                Some(e) => format!(" ({}: {})", e.code, e.message),
                None => String::new(),
            };
            return Some(format!("expected ok={ok}, got ok={}{detail}", response.ok));
        }
    }
    if let Some(code) = &expect.error_code {
        let actual = response.error.as_ref().map(|e| e.code.as_str());
        if actual != Some(code.as_str()) {
            return Some(format!("expected error {code}, got {}", actual.unwrap_or("success")));
        }
    }
    if let Some(subset) = &expect.data_subset {
        if !response.data.as_ref().is_some_and(|d| is_subset(subset, d)) {
            return Some("data does not contain the expected subset".into());
        }
    }
    None
}

fn replay_session(root: &Path, clock: Arc<ManualClock>) -> Session {
    let mut session = Session::new(root).with_clock(clock);
    session.lock = LockConfig {
        holder: "replay".into(),
        ..LockConfig::default()
    };
    session
}

/// Runs `range` of the script's steps in a brand-new session. `tick` is the
/// number of clock entries consumed by the steps before `range`.
fn run_steps(script: &ReplayScript, range: Range<usize>, root: &Path, mut tick: usize, run: &mut ReplayRun) {
    let start = script.clock.first().copied().unwrap_or_default();
    let clock = Arc::new(ManualClock::new(start));
    let session = replay_session(root, clock.clone());
    for index in range {
        let step = &script.steps[index];
        if is_mutating_op(&step.op) {
            clock.set(script.clock[tick]);
            tick += 1;
        }
        let id = Some(index as i64 + 1);
        let response = match Command::from_json(&step.op, step.args.clone()).and_then(|c| session.execute(&c)) {
            Ok(outcome) => ToolResponse::success(id, outcome.to_json()),
            Err(e) => ToolResponse::failure(id, &e),
        };
        if let Some(reason) = step.expect.as_ref().and_then(|e| check_expect(e, &response)) {
            run.failures.push(StepFailure { step: index, reason });
        }
        run.transcript.push(response);
    }
}

fn check_root(script: &ReplayScript, root: &Path) -> Result<()> {
    script.validate()?;
    let exists = root.join(GCC_DIR).exists();
    if script.fresh && exists {
        return Err(script_err(format!("{GCC_DIR} already exists but the script is fresh")));
    }
    if !script.fresh && !exists {
        return Err(script_err(format!("no {GCC_DIR} to resume from")));
    }
    Ok(())
}

pub fn run_script(script: &ReplayScript, root: &Path) -> Result<ReplayRun> {
    check_root(script, root)?;
    let mut run = ReplayRun {
        transcript: Vec::new(),
        digest: String::new(),
        failures: Vec::new(),
    };
    run_steps(script, 0..script.steps.len(), root, 0, &mut run);
    run.digest = tree_digest(root)?;
    Ok(run)
}

/// sha256 over the sorted relative-path → bytes map of `root/.GCC/`, as
/// lowercase hex. Each file contributes `path \0 len(le u64) bytes`.
pub fn tree_digest(root: &Path) -> Result<String> {
    fn walk(dir: &Path, prefix: &str, files: &mut BTreeMap<String, Vec<u8>>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let rel = if prefix.is_empty() { name } else { format!("{prefix}/{name}") };
            if entry.file_type()?.is_dir() {
                walk(&entry.path(), &rel, files)?;
            } else {
                files.insert(rel, fs::read(entry.path())?);
            }
        }
        Ok(())
    }
    let mut files = BTreeMap::new();
    let dir = root.join(GCC_DIR);
    if dir.is_dir() {
        walk(&dir, "", &mut files)?;
    }
    let mut hasher = Sha256::new();
    for (path, bytes) in &files {
        hasher.update(path.as_bytes());
        hasher.update([0]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(bytes);
    }
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HandoffReport {
    pub split: usize,
    pub full: ReplayRun,
    pub resumed: ReplayRun,
}

impl HandoffReport {
    pub fn digests_equal(&self) -> bool {
        self.full.digest == self.resumed.digest
    }

    pub fn transcripts_equal(&self) -> bool {
        self.full.transcript == self.resumed.transcript
    }
}

/// Runs the whole script on `root_a`, and on `root_b` runs the first `split`
/// steps, drops that session, then resumes the rest in a new one.
pub fn handoff(script: &ReplayScript, split: usize, root_a: &Path, root_b: &Path) -> Result<HandoffReport> {
    if split == 0 || split >= script.steps.len() {
        return Err(script_err(format!("split {split} outside 1..{}", script.steps.len())));
    }
    let full = run_script(script, root_a)?;
    check_root(script, root_b)?;
    let mut resumed = ReplayRun {
        transcript: Vec::new(),
        digest: String::new(),
        failures: Vec::new(),
    };
    run_steps(script, 0..split, root_b, 0, &mut resumed);
    let consumed = script.steps[..split].iter().filter(|s| is_mutating_op(&s.op)).count();
    run_steps(script, split..script.steps.len(), root_b, consumed, &mut resumed);
    resumed.digest = tree_digest(root_b)?;
    Ok(HandoffReport { split, full, resumed })
}

pub fn handoff_check(script: &ReplayScript, split: usize, root_a: &Path, root_b: &Path) -> Result<bool> {
    Ok(handoff(script, split, root_a, root_b)?.digests_equal())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn ts(i: u32) -> DateTime<Utc> {
        parse_timestamp(&format!("2025-01-01T00:{:02}:00Z", i)).unwrap()
    }

    fn script(steps: Vec<Step>) -> ReplayScript {
        ReplayScript {
            fresh: true,
            clock: (0..steps.len() as u32).map(ts).collect(),
            steps,
        }
    }

    fn basic() -> ReplayScript {
        script(vec![
            Step::new("init", json!({"goal": "g"})),
            Step::new("ota", json!({"observation": "a"})),
            Step::new("ota", json!({"observation": "b"})),
            Step::new("commit", json!({"message": "m", "contribution": "c"})),
        ])
    }

    #[test]
    fn jsonl_round_trip() {
        let s = basic();
        assert_eq!(ReplayScript::parse(&s.to_jsonl()).unwrap(), s);
    }

    #[test]
    fn deterministic_digest() {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let r1 = run_script(&basic(), a.path()).unwrap();
        let r2 = run_script(&basic(), b.path()).unwrap();
        assert_eq!(r1.digest, r2.digest);
        assert_eq!(r1.digest.len(), 64);
        assert!(r1.failures.is_empty());
    }

    #[test]
    fn expectation_failure_reports_index() {
        let mut s = basic();
        let mut merge = Step::new("merge", json!({"target": "ghost"}));
        merge.expect = Some(Expect {
            ok: Some(true),
            ..Expect::default()
        });
        s.steps.push(merge);
        s.clock.push(ts(9));
        let dir = tempfile::tempdir().unwrap();
        let run = run_script(&s, dir.path()).unwrap();
        assert_eq!(run.failures.len(), 1);
        assert_eq!(run.failures[0].step, 4);
    }

    #[test]
    fn script_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = script(vec![]);
        assert_eq!(run_script(&empty, dir.path()).unwrap_err().code(), crate::ErrorCode::ScriptError);
        let mut short = basic();
        short.clock.truncate(2);
        assert!(run_script(&short, dir.path()).is_err());
        let mut backwards = basic();
        backwards.clock.reverse();
        assert!(run_script(&backwards, dir.path()).is_err());
        assert!(ReplayScript::parse("{\"version\":1,\"fresh\":true}\n[1]\n").is_err());
    }

    #[test]
    fn subset_matching() {
        assert!(is_subset(&json!({"a": {"b": 1}}), &json!({"a": {"b": 1, "c": 2}, "d": 3})));
        assert!(!is_subset(&json!({"a": [1]}), &json!({"a": [1, 2]})));
        assert!(!is_subset(&json!({"x": 1}), &json!({})));
    }
}
