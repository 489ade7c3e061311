//! Byte-exact CLI output for every subcommand, plain and `--json`, on a
//! fixture built with a fixed clock. Regenerate with `UPDATE_GOLDEN=1`.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gcc_core::cli::{run_captured, Captured, Env};
use gcc_core::clock::ManualClock;
use gcc_core::Repository;

use super::ts;

pub struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
    clock: Arc<ManualClock>,
    json: bool,
    pub cases: Vec<(String, String)>,
}

impl Fixture {
    fn new(json: bool) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("project");
        fs::create_dir(&root).unwrap();
        Self {
            _dir: dir,
            root,
            clock: Arc::new(ManualClock::new(ts(0))),
            json,
            cases: Vec::new(),
        }
    }

    fn env(&self) -> Env {
        Env {
            cwd: self.root.clone(),
            gcc_root: None,
            clock: self.clock.clone(),
        }
    }

    fn run_in(&mut self, name: &str, args: &[&str], stdin: &[u8], env: Env) -> Captured {
        let mut argv = vec!["gcc"];
        if self.json {
            argv.push("--json");
        }
        argv.extend_from_slice(args);
        let out = run_captured(&argv, &env, stdin);
        let record = format!(
            "$ {}\nexit: {}\n--- stdout\n{}--- stderr\n{}",
            argv.iter().map(|a| shown(a)).collect::<Vec<_>>().join(" "),
            out.code,
            out.stdout,
            out.stderr
        );
        self.cases.push((name.to_owned(), record));
        self.clock.advance(7);
        out
    }

    fn run(&mut self, name: &str, args: &[&str]) -> Captured {
        self.run_in(name, args, b"", self.env())
    }

    fn cursor(&self, out: &Captured) -> String {
        if self.json {
            let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
            v["cursor"].as_str().unwrap().to_owned()
        } else {
            out.stdout
                .lines()
                .find_map(|l| l.strip_prefix("cursor: "))
                .unwrap()
                .to_owned()
        }
    }
}

fn shown(arg: &str) -> String {
    if arg.is_empty() || arg.contains(|c: char| c.is_whitespace() || c == '"') {
        format!("{arg:?}")
    } else {
        arg.to_owned()
    }
}

pub fn build(json: bool) -> Fixture {
    let mut f = Fixture::new(json);
    f.run("usage", &[]);
    f.run(
        "init",
        &["init", "--goal", "Ship a tiny key-value store", "--todo", "design format", "--todo", "write tests"],
    );
    f.run("ota", &["ota", "-o", "ls", "-t", "empty repo", "-a", "create Cargo.toml"]);
    f.run("commit", &["commit", "-m", "scaffold", "-c", "Created crate skeleton."]);
    f.run("branch", &["branch", "btree", "-p", "Try a B-tree index"]);
    for i in 0..6 {
        let obs = format!("read node {i}\nkeys: {}", i * 3);
        f.run(&format!("ota-{i}"), &["ota", "-o", &obs, "-t", "split?", "-a", "cargo test"]);
    }
    let env = f.env();
    f.run_in(
        "commit-stdin",
        &["commit", "-m", "btree insert", "--contribution-file", "-"],
        b"Insert path works.\n# splits pending",
        env,
    );
    f.run("context-branch", &["context", "--branch", "btree"]);
    let log = f.run("context-log", &["context", "--log"]);
    let up = f.run("scroll-up", &["scroll", "up", "--cursor", &f.cursor(&log)]);
    f.run("scroll-down", &["scroll", "down", "--cursor", &f.cursor(&up)]);
    f.run("checkout", &["checkout", "main"]);
    f.run("merge", &["merge", "btree", "-s", "B-tree adopted"]);
    f.run("merge-unknown", &["merge", "nope"]);
    f.run("context", &["context"]);
    let scaffold = Repository::open(&f.root).unwrap().read_commits("main").unwrap()[0].id.clone();
    f.run("context-commit", &["context", "--commit", &scaffold]);
    f.run("context-metadata", &["context", "--metadata", "merged", "--branch", "btree"]);
    f.run("checkpoints", &["checkpoints"]);
    let env = f.env();
    f.run_in(
        "serve",
        &["serve"],
        b"{\"id\":1,\"op\":\"context\",\"args\":{}}\nnot json\n{\"id\":2,\"op\":\"merge\",\"args\":{\"target\":\"ghost\"}}\n",
        env,
    );

    let script = f.root.join("session.jsonl");
    fs::write(
        &script,
        concat!(
            "{\"version\":1,\"fresh\":true,\"clock\":[\"2025-01-01T00:00:00Z\",\"2025-01-01T00:01:00Z\"]}\n",
            "{\"op\":\"init\",\"args\":{\"goal\":\"g\"}}\n",
            "{\"op\":\"commit\",\"args\":{\"message\":\"m\"},\"expect\":{\"ok\":true}}\n",
        ),
    )
    .unwrap();
    let mut env = f.env();
    env.gcc_root = Some(PathBuf::from("replayed"));
    fs::create_dir(f.root.join("replayed")).unwrap();
    f.run_in("replay", &["replay", "session.jsonl"], b"", env);
    f
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Compares (or with `UPDATE_GOLDEN` set, rewrites) every case; returns the
/// number of cases and a description of each mismatch.
pub fn check(json: bool) -> (usize, Vec<String>) {
    let f = build(json);
    let mode = if json { "json" } else { "plain" };
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let mut mismatches = Vec::new();
    for (i, (name, record)) in f.cases.iter().enumerate() {
        let path = golden_dir().join(format!("{i:02}-{name}.{mode}.txt"));
        if update {
            fs::write(&path, record).unwrap();
            continue;
        }
        match fs::read_to_string(&path) {
            Ok(expected) if expected == *record => {}
            Ok(expected) => mismatches.push(format!("{}:\n--- expected\n{expected}\n--- actual\n{record}", path.display())),
            Err(e) => mismatches.push(format!("{}: {e}", path.display())),
        }
    }
    (f.cases.len(), mismatches)
}
