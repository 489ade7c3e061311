//! A versioned, branchable memory hierarchy for long-horizon agents.
//!
//! Agent memory lives in a `.GCC/` directory: a shared roadmap (`main.md`)
//! and, per branch, milestone summaries (`commit.md`), a fine-grained
//! Observation-Thought-Action trace (`log.md`), and structured metadata
//! (`metadata.yaml`). [`Repository`] exposes the COMMIT / BRANCH / MERGE /
//! CONTEXT commands over that layout; [`cli`] and [`toolserver`] put them on
//! the command line and on a JSON-lines stdio protocol; [`replay`] drives
//! scripted sessions to check that a fresh session resumes byte-for-byte.

pub mod checkpoint;
pub mod command;
pub mod cli;
pub mod clock;
pub mod error;
pub mod model;
pub mod ops;
mod repo;
pub mod replay;
pub mod retrieve;
pub mod store;
pub mod summarizer;
pub mod toolserver;

pub use error::{ErrorCode, GccError, ParseError, Result};
pub use ops::{CommitRequest, MergeRequest};
pub use repo::{Repository, WriteFault};
pub use retrieve::{Cursor, Direction, ViewKind};
