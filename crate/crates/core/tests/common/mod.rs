#![allow(dead_code)]

pub mod golden;

use chrono::{DateTime, TimeZone, Utc};
use gcc_core::model::{CommitEntry, MetadataDoc, Milestone, OtaRecord, Roadmap, Tree};
use gcc_core::replay::{ReplayScript, Step};
use indexmap::IndexMap;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub fn ts(secs: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_735_689_600 + secs, 0).unwrap()
}

/// Text that exercises the escaping rules: headings, backslashes, blank
/// lines, tag look-alikes, unicode.
pub fn block_text() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[a-z ]{0,8}",
        Just("#".to_owned()),
        Just("## This Commit Contribution".to_owned()),
        Just("# COMMIT 00000000 | 2025-01-01T00:00:00Z | x".to_owned()),
        Just("\\".to_owned()),
        Just("\n".to_owned()),
        Just("\n\n".to_owned()),
        Just("=== OTA 1 2025-01-01T00:00:00Z ===".to_owned()),
        Just("== Branch x ==".to_owned()),
        Just("[O] ".to_owned()),
        Just("    ".to_owned()),
        Just("ü€".to_owned()),
        Just("- [ ] ".to_owned()),
        Just(": \"".to_owned()),
    ];
    prop::collection::vec(piece, 0..6).prop_map(|v| v.concat())
}

pub fn line_text() -> impl Strategy<Value = String> {
    block_text().prop_map(|s| s.replace('\n', " "))
}

pub fn timestamp() -> impl Strategy<Value = DateTime<Utc>> {
    (0i64..400_000_000).prop_map(ts)
}

pub fn roadmap() -> impl Strategy<Value = Roadmap> {
    (
        block_text(),
        prop::collection::vec((line_text(), any::<bool>()), 0..5),
        prop_oneof![Just(String::new()), block_text().prop_map(|s| format!("n{s}"))],
    )
        .prop_map(|(goal, ms, notes)| Roadmap {
            goal,
            milestones: ms.into_iter().map(|(text, done)| Milestone { text, done }).collect(),
            notes,
        })
}

pub fn commit_entry() -> impl Strategy<Value = CommitEntry> {
    ("[0-9a-f]{8}", timestamp(), line_text(), block_text(), block_text(), block_text()).prop_map(
        |(id, timestamp, message, branch_purpose, previous_progress, contribution)| CommitEntry {
            id,
            timestamp,
            message,
            branch_purpose,
            previous_progress,
            contribution,
        },
    )
}

pub fn commit_list() -> impl Strategy<Value = Vec<CommitEntry>> {
    prop::collection::vec(commit_entry(), 0..6)
}

pub fn ota_log() -> impl Strategy<Value = Vec<OtaRecord>> {
    let origin = prop_oneof![
        3 => Just(None),
        1 => "[A-Za-z0-9._-]{1,6}".prop_filter("dot names", |s| s != "." && s != "..").prop_map(Some),
    ];
    prop::collection::vec((timestamp(), block_text(), block_text(), block_text(), origin), 0..8).prop_map(|items| {
        items
            .into_iter()
            .enumerate()
            .map(|(i, (timestamp, observation, thought, action, origin))| OtaRecord {
                seq: i as u64 + 1,
                timestamp,
                observation,
                thought,
                action,
                origin,
            })
            .collect()
    })
}

fn key() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-z_]{1,8}",
        Just(String::new()),
        Just("has space".to_owned()),
        Just("- dash".to_owned()),
        Just("a: b".to_owned()),
        Just("\"q\"".to_owned()),
        Just("#".to_owned()),
    ]
}

fn scalar() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z0-9_./]{0,10}",
        block_text(),
        Just("true".to_owned()),
        Just("null".to_owned()),
        Just("{}".to_owned()),
        Just("[]".to_owned()),
        Just(" lead".to_owned()),
        Just("tab\there".to_owned()),
        Just("3.11".to_owned()),
    ]
}

pub fn tree() -> impl Strategy<Value = Tree> {
    scalar().prop_map(Tree::Scalar).prop_recursive(4, 32, 5, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Tree::List),
            prop::collection::vec((key(), inner), 0..4)
                .prop_map(|kv| Tree::Map(kv.into_iter().collect::<IndexMap<_, _>>())),
        ]
    })
}

pub fn metadata_doc() -> impl Strategy<Value = MetadataDoc> {
    prop::collection::vec((key(), tree()), 0..5).prop_map(|kv| MetadataDoc {
        segments: kv.into_iter().collect(),
    })
}

/// A random but mostly well-formed session: branches get fresh names, merges
/// target branches that exist, and some steps are deliberately invalid.
pub fn random_script(rng: &mut ChaCha8Rng, len: usize) -> ReplayScript {
    let mut steps = vec![Step::new("init", json!({"goal": "goal", "todo": ["first", "second"]}))];
    let mut branches = vec!["main".to_owned()];
    let mut created = 0;
    while steps.len() < len.max(1) {
        let n = steps.len();
        let step = match rng.gen_range(0..100) {
            0..=29 => Step::new(
                "ota",
                json!({"observation": format!("obs {n}\nline two"), "thought": format!("t{n}"), "action": "act"}),
            ),
            30..=49 => Step::new(
                "commit",
                json!({"message": format!("step {n}"), "contribution": format!("contribution {n}")}),
            ),
            50..=59 => {
                created += 1;
                let name = format!("b{created}");
                branches.push(name.clone());
                Step::new("branch", json!({"name": name, "purpose": format!("explore {created}")}))
            }
            60..=67 => Step::new("checkout", json!({"name": branches.choose(rng).unwrap()})),
            68..=79 => Step::new(
                "merge",
                json!({"target": branches.choose(rng).unwrap(), "synthesis": format!("merged at {n}")}),
            ),
            80..=84 => Step::new(
                "set_metadata",
                json!({"segment": "env_config", "tree": {"step": n, "tools": ["cargo", "git"]}}),
            ),
            85..=89 => Step::new("context", json!({"branch": branches.choose(rng).unwrap()})),
            90..=94 => Step::new("context", json!({"log": true})),
            95..=96 => Step::new("checkpoints", json!({})),
            _ => Step::new("merge", json!({"target": "ghost"})),
        };
        steps.push(step);
    }
    let mut clock = Vec::new();
    let mut t = rng.gen_range(0..1_000_000i64);
    for step in &steps {
        if gcc_core::replay::is_mutating_op(&step.op) {
            t += rng.gen_range(0..120);
            clock.push(ts(t));
        }
    }
    ReplayScript {
        fresh: true,
        clock,
        steps,
    }
}
