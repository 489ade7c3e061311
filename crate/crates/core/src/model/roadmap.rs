use serde::{Deserialize, Serialize};

use super::{collect_block, push_block};
use crate::error::ParseError;

const HEADER: &str = "# Project Roadmap";
const GOAL: &str = "## Goal";
const MILESTONES: &str = "## Milestones";
const NOTES: &str = "## Notes";

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Milestone {
    pub text: String,
    #[serde(default)]
    pub done: bool,
}

impl Milestone {
    pub fn todo(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            done: false,
        }
    }
}

/// Parsed `main.md`: project goal, milestone checklist, and free-form notes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Roadmap {
    pub goal: String,
    #[serde(default)]
    pub milestones: Vec<Milestone>,
    #[serde(default)]
    pub notes: String,
}

impl Roadmap {
    pub fn new(goal: impl Into<String>, todo: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            goal: goal.into(),
            milestones: todo.into_iter().map(Milestone::todo).collect(),
            notes: String::new(),
        }
    }

    /// Milestone texts occupy one line each in `main.md`.
    pub fn validate(&self) -> Result<(), String> {
        match self.milestones.iter().find(|m| m.text.contains('\n')) {
            Some(m) => Err(format!("milestone text spans lines: {:?}", m.text)),
            None => Ok(()),
        }
    }
}

pub fn render_roadmap(roadmap: &Roadmap) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push_str("\n\n");
    out.push_str(GOAL);
    out.push('\n');
    push_block(&mut out, &roadmap.goal);
    out.push('\n');
    out.push_str(MILESTONES);
    out.push('\n');
    for m in &roadmap.milestones {
        out.push_str(if m.done { "- [x] " } else { "- [ ] " });
        out.push_str(&m.text);
        out.push('\n');
    }
    if !roadmap.notes.is_empty() {
        out.push('\n');
        out.push_str(NOTES);
        out.push('\n');
        out.push_str(&roadmap.notes);
        out.push('\n');
    }
    out
}

enum Section {
    Preamble,
    Goal,
    Milestones,
}

pub fn parse_roadmap(text: &str) -> Result<Roadmap, ParseError> {
    let lines: Vec<&str> = text.split('\n').collect();
    if lines.first().copied() != Some(HEADER) {
        return Err(ParseError::new(1, format!("expected `{HEADER}`")));
    }

    let mut section = Section::Preamble;
    let mut goal: Option<Vec<&str>> = None;
    let mut milestones: Option<Vec<Milestone>> = None;
    let mut notes = String::new();

    let mut idx = 1;
    while idx < lines.len() {
        let line = lines[idx];
        let lineno = idx + 1;
        if line.starts_with("## ") {
            match line {
                GOAL if goal.is_none() => {
                    goal = Some(Vec::new());
                    section = Section::Goal;
                }
                MILESTONES if milestones.is_none() => {
                    milestones = Some(Vec::new());
                    section = Section::Milestones;
                }
                GOAL | MILESTONES => {
                    return Err(ParseError::new(lineno, format!("duplicate section `{line}`")));
                }
                NOTES => {
                    notes = trailing_text(&lines[idx + 1..]);
                    break;
                }
                _ => {
                    // Unrecognised trailing sections are kept verbatim.
                    notes = trailing_text(&lines[idx..]);
                    break;
                }
            }
            idx += 1;
            continue;
        }
        match section {
            Section::Preamble => {
                if !line.is_empty() {
                    return Err(ParseError::new(lineno, "text before first section"));
                }
            }
            Section::Goal => goal.as_mut().expect("goal section open").push(line),
            Section::Milestones => {
                if line.is_empty() {
                    // separator
                } else if let Some(text) = line.strip_prefix("- [ ] ") {
                    milestones.as_mut().expect("milestones open").push(Milestone {
                        text: text.to_owned(),
                        done: false,
                    });
                } else if let Some(text) = line.strip_prefix("- [x] ") {
                    milestones.as_mut().expect("milestones open").push(Milestone {
                        text: text.to_owned(),
                        done: true,
                    });
                } else {
                    return Err(ParseError::new(lineno, "malformed milestone line"));
                }
            }
        }
        idx += 1;
    }

    let goal = goal.ok_or_else(|| ParseError::new(lines.len(), format!("missing `{GOAL}` section")))?;
    Ok(Roadmap {
        goal: collect_block(goal),
        milestones: milestones.unwrap_or_default(),
        notes,
    })
}

fn trailing_text(lines: &[&str]) -> String {
    let mut lines = lines.to_vec();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    lines.join("\n")
}
