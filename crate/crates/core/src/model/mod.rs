//! The four `.GCC/` document formats and their canonical parse/render pairs.
//!
//! Every renderer emits `\n`-terminated UTF-8 text that its parser accepts,
//! and `parse(render(x)) == x` holds for every value the renderer accepts.

mod commit;
mod metadata;
mod ota;
mod roadmap;

pub use commit::{compute_commit_id, parse_commit_file, render_commit_file, render_commit_entry, CommitEntry};
pub use metadata::{parse_metadata, render_metadata, MetadataDoc, Tree};
pub use ota::{parse_log, render_log, render_ota, OtaRecord};
pub use roadmap::{parse_roadmap, render_roadmap, Milestone, Roadmap};
pub(crate) use ota::{origin_close_tag, origin_open_tag};

/// Free-text blocks share one escaping rule: a line starting with `#` or `\`
/// gets a leading `\`, so block content can never be mistaken for a heading.
pub(crate) fn escape_block_line(line: &str) -> std::borrow::Cow<'_, str> {
    if line.starts_with('#') || line.starts_with('\\') {
        format!("\\{line}").into()
    } else {
        line.into()
    }
}

pub(crate) fn unescape_block_line(line: &str) -> &str {
    line.strip_prefix('\\').unwrap_or(line)
}

/// Appends a block body followed by the blank separator line.
pub(crate) fn push_block(out: &mut String, block: &str) {
    if !block.is_empty() {
        for line in block.split('\n') {
            out.push_str(&escape_block_line(line));
            out.push('\n');
        }
    }
}

/// Inverse of [`push_block`] given the raw lines between two headings
/// (separator line included).
pub(crate) fn collect_block(mut lines: Vec<&str>) -> String {
    if lines.last() == Some(&"") {
        lines.pop();
    }
    lines
        .into_iter()
        .map(unescape_block_line)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Splits text into physical lines, dropping the empty tail after a final `\n`.
pub(crate) fn physical_lines(text: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = text.split('\n').collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    lines
}

pub(crate) fn physical_lines_owned(text: &str) -> Vec<String> {
    physical_lines(text).into_iter().map(str::to_owned).collect()
}
