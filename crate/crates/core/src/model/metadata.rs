//! Strict YAML subset for `metadata.yaml`: two-space indentation, block maps,
//! block lists, `{}`/`[]` for empty containers, and string scalars that are
//! either plain or JSON-style double-quoted. No anchors, tags, flow
//! collections, or multi-document streams.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::ParseError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Tree {
    Scalar(String),
    List(Vec<Tree>),
    Map(IndexMap<String, Tree>),
}

impl Tree {
    pub fn empty_map() -> Self {
        Tree::Map(IndexMap::new())
    }

    pub fn scalar(s: impl Into<String>) -> Self {
        Tree::Scalar(s.into())
    }

    /// Converts JSON into a tree. Numbers and booleans become their textual
    /// scalar; `null` has no representation.
    pub fn from_json(value: &serde_json::Value) -> Result<Self, String> {
        use serde_json::Value;
        Ok(match value {
            Value::Null => return Err("null is not a valid metadata value".into()),
            Value::Bool(b) => Tree::Scalar(b.to_string()),
            Value::Number(n) => Tree::Scalar(n.to_string()),
            Value::String(s) => Tree::Scalar(s.clone()),
            Value::Array(items) => Tree::List(items.iter().map(Tree::from_json).collect::<Result<_, _>>()?),
            Value::Object(map) => Tree::Map(
                map.iter()
                    .map(|(k, v)| Ok((k.clone(), Tree::from_json(v)?)))
                    .collect::<Result<_, String>>()?,
            ),
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

impl<'de> Deserialize<'de> for Tree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        Tree::from_json(&value).map_err(serde::de::Error::custom)
    }
}

/// Parsed `metadata.yaml`: ordered, uniquely named segments.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MetadataDoc {
    pub segments: IndexMap<String, Tree>,
}

impl MetadataDoc {
    /// The two segments every fresh branch starts with.
    pub fn with_default_segments() -> Self {
        let mut segments = IndexMap::new();
        segments.insert("file_structure".to_owned(), Tree::empty_map());
        segments.insert("env_config".to_owned(), Tree::empty_map());
        Self { segments }
    }

    pub fn get(&self, segment: &str) -> Option<&Tree> {
        self.segments.get(segment)
    }

    /// Replaces a segment in place, or appends it when new.
    pub fn set(&mut self, segment: impl Into<String>, tree: Tree) {
        self.segments.insert(segment.into(), tree);
    }
}

fn is_plain(s: &str) -> bool {
    let Some(first) = s.chars().next() else {
        return false;
    };
    if first.is_whitespace() || "-?:,[]{}#&*!|>'\"%@`\\".contains(first) {
        return false;
    }
    if s.ends_with(char::is_whitespace) || s.ends_with(':') {
        return false;
    }
    !s.contains(": ") && !s.contains(" #") && !s.chars().any(char::is_control)
}

fn render_scalar(s: &str) -> String {
    if is_plain(s) {
        s.to_owned()
    } else {
        serde_json::to_string(s).expect("string serialization is infallible")
    }
}

fn render_inline(tree: &Tree) -> Option<String> {
    match tree {
        Tree::Scalar(s) => Some(render_scalar(s)),
        Tree::List(items) if items.is_empty() => Some("[]".into()),
        Tree::Map(map) if map.is_empty() => Some("{}".into()),
        _ => None,
    }
}

fn render_block(out: &mut String, tree: &Tree, indent: usize) {
    let pad = " ".repeat(indent);
    match tree {
        Tree::Map(map) => {
            for (key, value) in map {
                out.push_str(&pad);
                out.push_str(&render_scalar(key));
                out.push(':');
                match render_inline(value) {
                    Some(inline) => {
                        out.push(' ');
                        out.push_str(&inline);
                        out.push('\n');
                    }
                    None => {
                        out.push('\n');
                        render_block(out, value, indent + 2);
                    }
                }
            }
        }
        Tree::List(items) => {
            for item in items {
                out.push_str(&pad);
                out.push('-');
                match render_inline(item) {
                    Some(inline) => {
                        out.push(' ');
                        out.push_str(&inline);
                        out.push('\n');
                    }
                    None => {
                        out.push('\n');
                        render_block(out, item, indent + 2);
                    }
                }
            }
        }
        Tree::Scalar(s) => {
            out.push_str(&pad);
            out.push_str(&render_scalar(s));
            out.push('\n');
        }
    }
}

pub fn render_metadata(doc: &MetadataDoc) -> String {
    let mut out = String::new();
    render_block(&mut out, &Tree::Map(doc.segments.clone()), 0);
    out
}

struct Line<'a> {
    number: usize,
    indent: usize,
    body: &'a str,
}

fn tokenize(text: &str) -> Result<Vec<Line<'_>>, ParseError> {
    let mut lines = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let number = idx + 1;
        if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
            continue;
        }
        if raw.contains('\t') {
            return Err(ParseError::new(number, "tabs are not allowed"));
        }
        let body = raw.trim_start_matches(' ');
        let indent = raw.len() - body.len();
        if indent % 2 != 0 {
            return Err(ParseError::new(number, "indentation must be a multiple of two spaces"));
        }
        lines.push(Line { number, indent, body });
    }
    Ok(lines)
}

fn parse_scalar(text: &str, line: usize) -> Result<String, ParseError> {
    if text.starts_with('"') {
        serde_json::from_str::<String>(text).map_err(|e| ParseError::new(line, format!("bad quoted string: {e}")))
    } else if is_plain(text) {
        Ok(text.to_owned())
    } else {
        Err(ParseError::new(line, format!("scalar {text:?} must be quoted")))
    }
}

fn parse_inline(text: &str, line: usize) -> Result<Tree, ParseError> {
    match text {
        "{}" => Ok(Tree::empty_map()),
        "[]" => Ok(Tree::List(Vec::new())),
        _ => parse_scalar(text, line).map(Tree::Scalar),
    }
}

/// Splits `key: value` / `key:` respecting quoted keys.
fn split_key(body: &str, line: usize) -> Result<(String, Option<&str>), ParseError> {
    let (key, rest) = if body.starts_with('"') {
        let mut de = serde_json::Deserializer::from_str(body).into_iter::<String>();
        let key = match de.next() {
            Some(Ok(k)) => k,
            _ => return Err(ParseError::new(line, "bad quoted key")),
        };
        (key, &body[de.byte_offset()..])
    } else {
        let colon = body
            .find(": ")
            .or_else(|| body.ends_with(':').then(|| body.len() - 1))
            .ok_or_else(|| ParseError::new(line, "expected `key:`"))?;
        let key = &body[..colon];
        if !is_plain(key) {
            return Err(ParseError::new(line, format!("key {key:?} must be quoted")));
        }
        (key.to_owned(), &body[colon..])
    };
    match rest {
        ":" => Ok((key, None)),
        _ => match rest.strip_prefix(": ") {
            Some(value) if !value.is_empty() => Ok((key, Some(value))),
            _ => Err(ParseError::new(line, "expected `: ` after key")),
        },
    }
}

struct Parser<'a> {
    lines: Vec<Line<'a>>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Line<'a>> {
        self.lines.get(self.pos)
    }

    fn is_list_item(body: &str) -> bool {
        body == "-" || body.starts_with("- ")
    }

    /// Parses the nested block that must follow a `key:` or `-` line.
    fn nested(&mut self, parent_indent: usize, parent_line: usize) -> Result<Tree, ParseError> {
        match self.peek() {
            Some(l) if l.indent == parent_indent + 2 => self.block(parent_indent + 2),
            Some(l) if l.indent > parent_indent => Err(ParseError::new(l.number, "over-indented block")),
            _ => Err(ParseError::new(parent_line, "missing nested block")),
        }
    }

    fn block(&mut self, indent: usize) -> Result<Tree, ParseError> {
        let first = self.peek().expect("block called with a line available");
        if Self::is_list_item(first.body) {
            self.list(indent)
        } else {
            self.map(indent)
        }
    }

    fn list(&mut self, indent: usize) -> Result<Tree, ParseError> {
        let mut items = Vec::new();
        while let Some(line) = self.peek() {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(ParseError::new(line.number, "unexpected indentation"));
            }
            if !Self::is_list_item(line.body) {
                return Err(ParseError::new(line.number, "expected list item"));
            }
            let (number, body) = (line.number, line.body);
            self.pos += 1;
            if body == "-" {
                items.push(self.nested(indent, number)?);
            } else {
                items.push(parse_inline(&body[2..], number)?);
            }
        }
        Ok(Tree::List(items))
    }

    fn map(&mut self, indent: usize) -> Result<Tree, ParseError> {
        let mut map = IndexMap::new();
        while let Some(line) = self.peek() {
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(ParseError::new(line.number, "unexpected indentation"));
            }
            if Self::is_list_item(line.body) {
                return Err(ParseError::new(line.number, "list item inside a map"));
            }
            let (number, body) = (line.number, line.body);
            self.pos += 1;
            let (key, value) = split_key(body, number)?;
            let value = match value {
                Some(v) => parse_inline(v, number)?,
                None => self.nested(indent, number)?,
            };
            if map.insert(key.clone(), value).is_some() {
                return Err(ParseError::new(number, format!("duplicate key {key:?}")));
            }
        }
        Ok(Tree::Map(map))
    }
}

pub fn parse_metadata(text: &str) -> Result<MetadataDoc, ParseError> {
    let lines = tokenize(text)?;
    if lines.is_empty() {
        return Ok(MetadataDoc::default());
    }
    if lines[0].indent != 0 {
        return Err(ParseError::new(lines[0].number, "top level must not be indented"));
    }
    let mut parser = Parser { lines, pos: 0 };
    match parser.map(0)? {
        Tree::Map(segments) => Ok(MetadataDoc { segments }),
        _ => unreachable!("map() always yields a map"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(entries: Vec<(&str, Tree)>) -> Tree {
        Tree::Map(entries.into_iter().map(|(k, v)| (k.to_owned(), v)).collect())
    }

    #[test]
    fn renders_segments_at_top_level() {
        let mut doc = MetadataDoc::default();
        doc.set("file_structure", map(vec![("src", Tree::List(vec![Tree::scalar("io.py")]))]));
        doc.set("env_config", Tree::empty_map());
        let text = render_metadata(&doc);
        assert_eq!(text, "file_structure:\n  src:\n    - io.py\nenv_config: {}\n");
        assert_eq!(parse_metadata(&text).unwrap(), doc);
    }

    #[test]
    fn default_doc() {
        let text = render_metadata(&MetadataDoc::with_default_segments());
        assert_eq!(text, "file_structure: {}\nenv_config: {}\n");
    }

    #[test]
    fn duplicate_top_level_key() {
        let err = parse_metadata("a: 1\nb: 2\na: 3\n").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn bad_indentation() {
        assert!(parse_metadata("a:\n   b: 1\n").is_err());
        assert!(parse_metadata("a:\n    b: 1\n").is_err());
        assert!(parse_metadata("a:\n").is_err());
        assert!(parse_metadata("  a: 1\n").is_err());
        assert!(parse_metadata("a:\tb\n").is_err());
    }

    #[test]
    fn awkward_scalars_are_quoted() {
        let mut doc = MetadataDoc::default();
        let odd = ["", " lead", "trail ", "a: b", "- x", "{}", "#c", "x #y", "multi\nline", "ключ", "a\"b"];
        doc.set(
            "odd",
            Tree::List(odd.iter().map(|s| Tree::scalar(*s)).collect()),
        );
        doc.set(
            "keys",
            Tree::Map(odd.iter().map(|s| (s.to_string(), Tree::scalar("v"))).collect()),
        );
        doc.set("nested", Tree::List(vec![Tree::List(vec![]), map(vec![("k", Tree::List(vec![Tree::empty_map()]))])]));
        let text = render_metadata(&doc);
        assert_eq!(parse_metadata(&text).unwrap(), doc);
    }

    #[test]
    fn json_bridge() {
        let json = serde_json::json!({"python": "3.11", "n": 3, "deps": ["a", true]});
        let tree = Tree::from_json(&json).unwrap();
        assert_eq!(tree.to_json(), serde_json::json!({"python": "3.11", "n": "3", "deps": ["a", "true"]}));
        assert!(Tree::from_json(&serde_json::Value::Null).is_err());
    }
}
