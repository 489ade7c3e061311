//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p gcc-core --test acceptance -- --nocapture` to see them.

mod common;

use std::sync::Arc;
use std::time::{Duration, Instant};

use gcc_core::checkpoint::list_checkpoints;
use gcc_core::cli::{run_captured, Env};
use gcc_core::clock::ManualClock;
use gcc_core::command::{Session, OPS};
use gcc_core::model::*;
use gcc_core::replay::{handoff, run_script};
use gcc_core::retrieve::WindowItems;
use gcc_core::summarizer::default_fold;
use gcc_core::toolserver::serve;
use gcc_core::{CommitRequest, Direction, ErrorCode, MergeRequest, ParseError, Repository};
use proptest::strategy::Strategy;
use proptest::test_runner::{Config, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn fresh_repo(goal: &str) -> (tempfile::TempDir, Repository, Arc<ManualClock>) {
    let dir = tempfile::tempdir().unwrap();
    let clock = Arc::new(ManualClock::new(common::ts(0)));
    let repo = Repository::init(dir.path(), goal, &[]).unwrap().with_clock(clock.clone());
    (dir, repo, clock)
}

fn round_trips<T, S>(strategy: S, render: impl Fn(&T) -> String, parse: impl Fn(&str) -> Result<T, ParseError>) -> Result<(), String>
where
    T: PartialEq + std::fmt::Debug,
    S: Strategy<Value = T>,
{
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&strategy, |x| {
            let text = render(&x);
            let back = parse(&text).map_err(|e| proptest::test_runner::TestCaseError::fail(format!("{e}")))?;
            proptest::prop_assert_eq!(back, x);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    round_trips(common::roadmap(), render_roadmap, parse_roadmap).map_err(|e| format!("roadmap: {e}"))?;
    round_trips(common::commit_list(), |v| render_commit_file(v), parse_commit_file).map_err(|e| format!("commits: {e}"))?;
    round_trips(common::ota_log(), |v| render_log(v), parse_log).map_err(|e| format!("log: {e}"))?;
    round_trips(common::metadata_doc(), render_metadata, parse_metadata).map_err(|e| format!("metadata: {e}"))?;
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("4 x 1000 round trips exact in {:.2?}", elapsed))
}

fn criterion_2() -> Outcome {
    let (dir, repo, clock) = fresh_repo("windows");
    for i in 0..25 {
        clock.advance(1);
        repo.commit(&CommitRequest::new(format!("c{i}"), "")).unwrap();
    }
    let all = repo.read_commits("main").unwrap();
    ensure!(all.len() == 25, "fixture has {} commits", all.len());
    let view = repo.context_branch("main").unwrap();
    ensure!(view.commits.len() == 10, "branch view returned {}", view.commits.len());

    let mut seen: Vec<String> = view.commits.iter().map(|c| c.id.clone()).collect();
    let mut cursor = view.cursor;
    loop {
        let page = repo.scroll(&cursor, Direction::Up).unwrap();
        if let WindowItems::Commits(items) = &page.items {
            if cursor == page.cursor {
                break;
            }
            seen.extend(items.iter().map(|c| c.id.clone()));
        }
        cursor = page.cursor;
    }
    let mut expected: Vec<String> = all.iter().rev().map(|e| e.id.clone()).collect();
    ensure!(seen == expected, "commit scroll visited {} of 25 or out of order", seen.len());

    for i in 0..10 {
        repo.append_ota(&format!("o{i}"), "t", "a").unwrap();
    }
    repo.append_ota("first\nsecond", "t", "a").unwrap();
    let text = repo.read_log_text("main").unwrap();
    let lines: Vec<&str> = text.lines().collect();
    ensure!(lines.len() == 45, "fixture log has {} lines", lines.len());
    let view = repo.context_log(None).unwrap();
    ensure!(view.lines.len() == 20, "log view returned {}", view.lines.len());

    let mut windows = vec![view.lines.clone()];
    let mut cursor = view.cursor;
    loop {
        let page = repo.scroll(&cursor, Direction::Up).unwrap();
        if cursor == page.cursor {
            break;
        }
        if let WindowItems::Lines(l) = page.items {
            windows.push(l);
        }
        cursor = page.cursor;
    }
    windows.reverse();
    let visited: Vec<String> = windows.concat();
    expected = lines.iter().map(|s| s.to_string()).collect();
    ensure!(visited == expected, "log scroll visited {} of 45 lines", visited.len());

    let env = Env {
        cwd: dir.path().to_path_buf(),
        gcc_root: None,
        clock: clock.clone(),
    };
    let out = run_captured(&["gcc", "--json", "context", "--branch", "main"], &env, b"");
    let v: Value = serde_json::from_str(&out.stdout).map_err(|e| e.to_string())?;
    ensure!(v["commits"].as_array().map(Vec::len) == Some(10), "CLI branch view size");
    let out = run_captured(&["gcc", "context", "--log"], &env, b"");
    ensure!(out.stdout.lines().count() == 21, "CLI log view is not 20 lines + cursor");
    Ok("10 of 25 commits, 20 of 45 lines, scroll covers all exactly once".into())
}

fn criterion_3() -> Outcome {
    let (_dir, repo, clock) = fresh_repo("template");
    repo.branch("k50", "fifty commits").unwrap();
    for i in 0..50 {
        clock.advance(3);
        repo.append_ota(&format!("step {i}"), "", "").unwrap();
        let contribution = format!("Contribution {i}\n# looks like a heading\nline three");
        repo.commit(&CommitRequest::new(format!("commit {i}"), contribution)).unwrap();
    }
    let text = std::fs::read_to_string(repo.paths().branch("k50").commit_file).unwrap();
    let entries = parse_commit_file(&text).map_err(|e| e.to_string())?;
    ensure!(entries.len() == 51, "{} entries", entries.len());
    ensure!(entries[0].message == "branch created", "first entry is not the bootstrap");
    let chunks: Vec<&str> = text.split("\n# COMMIT ").collect();
    ensure!(chunks.len() == 51, "{} raw entry chunks", chunks.len());
    for chunk in &chunks {
        for heading in ["## Branch Purpose", "## Previous Progress Summary", "## This Commit Contribution"] {
            ensure!(chunk.lines().any(|l| l == heading), "entry missing {heading}");
        }
    }
    let mut summary = String::new();
    for (i, e) in entries.iter().enumerate() {
        ensure!(e.previous_progress == summary, "chain breaks at entry {i}");
        summary = default_fold(&summary, &e.contribution, 2000);
    }
    Ok("50 entries + bootstrap, all headings, summary chain re-derived".into())
}

fn criterion_4() -> Outcome {
    let (_dir, repo, _clock) = fresh_repo("merge");
    for i in 0..4 {
        repo.append_ota(&format!("native {i}"), "", "").unwrap();
    }
    repo.branch("side", "seventeen").unwrap();
    for i in 0..17 {
        repo.append_ota(&format!("side {i}\nmore"), "t", "a").unwrap();
    }
    let side_log = repo.read_log_text("side").unwrap();
    repo.checkout("main").unwrap();
    let native_bytes = repo.read_log_text("main").unwrap();
    repo.merge(&MergeRequest::new("side", "done")).unwrap();

    let text = repo.read_log_text("main").unwrap();
    ensure!(text.starts_with(&native_bytes), "native bytes changed");
    let records = parse_log(&text).map_err(|e| e.to_string())?;
    let native = records.iter().filter(|r| r.origin.is_none()).count();
    ensure!(native == 5, "{native} native records (4 + pre-merge snapshot expected)");
    ensure!(records.len() == native + 17, "{} records", records.len());
    let tag = "== Branch side ==\n";
    let at = text.find(tag).ok_or("origin tag missing")?;
    let after = &text[at + tag.len()..];
    ensure!(after.starts_with(&side_log), "merged block is not the branch log verbatim");
    ensure!(after[side_log.len()..] == *"== End Branch side ==\n", "unexpected text after merged block");
    let first = records.iter().position(|r| r.origin.is_some()).unwrap();
    ensure!(records[first..].iter().all(|r| r.origin.as_deref() == Some("side")), "merged records not contiguous");
    Ok(format!("{native} native + 17 merged, contiguous after `{}`", tag.trim_end()))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let script = common::random_script(&mut rng, 100);
    let dir = tempfile::tempdir().unwrap();
    let run = run_script(&script, dir.path()).map_err(|e| e.to_string())?;
    let expected = script
        .steps
        .iter()
        .zip(&run.transcript)
        .filter(|(s, r)| r.ok && (s.op == "commit" || s.op == "merge"))
        .count();
    let ledger = list_checkpoints(Repository::open(dir.path()).unwrap().paths()).unwrap();
    ensure!(ledger.len() == expected, "ledger {} vs {} commits+merges", ledger.len(), expected);
    ensure!(expected > 10, "script too thin ({expected} commits+merges)");
    Ok(format!("ledger length {} = commit+merge count", ledger.len()))
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut equal = 0;
    for i in 0..100 {
        let len = rng.gen_range(2..=40);
        let script = common::random_script(&mut rng, len);
        let split = rng.gen_range(1..script.steps.len());
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let report = handoff(&script, split, a.path(), b.path()).map_err(|e| format!("script {i}: {e}"))?;
        if report.digests_equal() {
            equal += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure!(equal == 100, "{equal}/100 digests equal");
    ensure!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    Ok(format!("100/100 handoff digests equal in {:.2?}", elapsed))
}

fn fuzz_line(rng: &mut ChaCha8Rng, id: usize) -> Vec<u8> {
    let valid = [
        format!(r#"{{"id":{id},"op":"context","args":{{}}}}"#),
        format!(r#"{{"id":{id},"op":"ota","args":{{"observation":"o","thought":"t","action":"a"}}}}"#),
        format!(r#"{{"id":{id},"op":"commit","args":{{"message":"m{id}","contribution":"c"}}}}"#),
        format!(r#"{{"id":{id},"op":"context","args":{{"log":true}}}}"#),
        format!(r#"{{"id":{id},"op":"branch","args":{{"name":"f{id}","purpose":"p"}}}}"#),
        format!(r#"{{"id":{id},"op":"checkout","args":{{"name":"main"}}}}"#),
        format!(r#"{{"id":{id},"op":"merge","args":{{"target":"f{}"}}}}"#, id.saturating_sub(1)),
        format!(r#"{{"id":{id},"op":"scroll","args":{{"cursor":"bG9nOm1haW46MDoyMDphYmNk","direction":"up"}}}}"#),
    ];
    let mut line = match rng.gen_range(0..5) {
        0 => (0..rng.gen_range(0..80)).map(|_| rng.gen::<u8>()).collect(),
        1 => valid.choose(rng).unwrap().clone().into_bytes(),
        2 => {
            let mut bytes = valid.choose(rng).unwrap().clone().into_bytes();
            for _ in 0..rng.gen_range(1..6) {
                let at = rng.gen_range(0..bytes.len());
                match rng.gen_range(0..3) {
                    0 => bytes[at] = rng.gen(),
                    1 => {
                        bytes.remove(at);
                    }
                    _ => bytes.insert(at, rng.gen()),
                }
                if bytes.is_empty() {
                    break;
                }
            }
            bytes
        }
        3 => {
            let op = if rng.gen_bool(0.5) { *OPS.choose(rng).unwrap() } else { "nope" };
            let id = match rng.gen_range(0..4) {
                0 => "null".to_owned(),
                1 => "\"x\"".to_owned(),
                2 => "1.5".to_owned(),
                _ => id.to_string(),
            };
            let args = ["{}", "[]", "null", "{\"name\":7}", "{\"target\":\"\"}", "{\"segment\":\"\",\"tree\":null}"]
                .choose(rng)
                .unwrap();
            format!(r#"{{"id":{id},"op":"{op}","args":{args}}}"#).into_bytes()
        }
        _ => {
            let depth = rng.gen_range(1..300);
            format!("{}{}", "[".repeat(depth), "]".repeat(depth)).into_bytes()
        }
    };
    line.retain(|b| *b != b'\n');
    line
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    Repository::init(dir.path(), "fuzz", &[]).unwrap();
    let session = Session::new(dir.path());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut input = Vec::new();
    for id in 0..10_000 {
        input.extend(fuzz_line(&mut rng, id));
        input.push(b'\n');
    }
    let mut out = Vec::new();
    serve(&session, &input[..], &mut out).map_err(|e| e.to_string())?;
    let text = String::from_utf8(out).map_err(|e| e.to_string())?;
    let codes: Vec<&str> = ErrorCode::ALL.iter().map(|c| c.as_str()).collect();
    let mut count = 0;
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).map_err(|e| format!("response {count}: {e}"))?;
        ensure!(v["id"].is_i64() || v["id"].is_null(), "response {count}: bad id");
        ensure!(v["ok"].is_boolean(), "response {count}: missing ok");
        ensure!(v.get("data").is_some() != v.get("error").is_some(), "response {count}: data/error");
        if let Some(err) = v.get("error") {
            ensure!(codes.contains(&err["code"].as_str().unwrap_or("")), "response {count}: unknown code");
        }
        count += 1;
    }
    ensure!(count == 10_000, "{count} responses");
    Ok("10000 fuzzed lines -> 10000 well-formed responses".into())
}

fn criterion_8() -> Outcome {
    let mut total = 0;
    for json in [false, true] {
        let (cases, mismatches) = common::golden::check(json);
        ensure!(mismatches.is_empty(), "{} golden mismatches, first: {}", mismatches.len(), mismatches[0]);
        total += cases;
    }
    Ok(format!("{total} golden cases byte-exact (plain and --json)"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("format round trips", criterion_1),
        ("window constants", criterion_2),
        ("commit template fidelity", criterion_3),
        ("merge traceability", criterion_4),
        ("checkpoint parity", criterion_5),
        ("handoff equivalence", criterion_6),
        ("toolserver robustness", criterion_7),
        ("CLI conformance", criterion_8),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail}", i + 1),
            Err(why) => {
                println!("criterion {}: FAIL {name}: {why}", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
