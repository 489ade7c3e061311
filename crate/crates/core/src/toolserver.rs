//! JSON-lines tool protocol on standard streams.
//!
//! Each input line is one request `{"id": <int>, "op": "...", "args": {...}}`
//! and produces exactly one response line, in order:
//! `{"id":1,"ok":true,"data":{...}}` or
//! `{"id":1,"ok":false,"error":{"code":"UnknownBranch","message":"..."}}`.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};

use serde::Serialize;
use serde_json::Value;

use crate::command::{Command, Session};
use crate::error::{ErrorCode, GccError};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ToolResponse {
    pub id: Option<i64>,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl ToolResponse {
    pub fn success(id: Option<i64>, data: Value) -> Self {
        Self {
            id,
            ok: true,
            data: Some(data),
            error: None,
        }
    }

    pub fn failure(id: Option<i64>, err: &GccError) -> Self {
        Self {
            id,
            ok: false,
            data: None,
            error: Some(ErrorBody {
                code: err.code(),
                message: err.to_string(),
            }),
        }
    }

    pub fn to_line(&self) -> String {
        let mut line = serde_json::to_string(self).expect("responses serialize");
        line.push('\n');
        line
    }
}

/// Request state for one connection: remembers ids already used.
#[derive(Default)]
pub struct Connection {
    seen: HashSet<i64>,
}

/// Splits a raw request into id, op and args. The id is recovered whenever
/// the line is a JSON object with an integer `id`, even if the rest is bad.
fn parse_request(line: &[u8]) -> (Option<i64>, Result<(String, Value), GccError>) {
    let bad = |msg: String| Err(GccError::BadRequest(msg));
    let text = match std::str::from_utf8(line) {
        Ok(t) => t,
        Err(_) => return (None, bad("request is not UTF-8".into())),
    };
    let value: Value = match serde_json::from_str(text) {
        Ok(v) => v,
        Err(e) => return (None, bad(format!("malformed JSON: {e}"))),
    };
    let Value::Object(mut obj) = value else {
        return (None, bad("request must be a JSON object".into()));
    };
    let id = match obj.get("id") {
        Some(v) => match v.as_i64() {
            Some(id) => id,
            None => return (None, bad("id must be an integer".into())),
        },
        None => return (None, bad("missing id".into())),
    };
    let op = match obj.remove("op") {
        Some(Value::String(op)) => op,
        Some(_) => return (Some(id), bad("op must be a string".into())),
        None => return (Some(id), bad("missing op".into())),
    };
    if let Some(extra) = obj.keys().find(|k| *k != "id" && *k != "args") {
        return (Some(id), bad(format!("unexpected field {extra:?}")));
    }
    let args = obj.remove("args").unwrap_or(Value::Null);
    (Some(id), Ok((op, args)))
}

impl Connection {
    pub fn new() -> Self {
        Self::default()
    }

    /// Handles one request line (without its trailing newline).
    pub fn handle_line(&mut self, session: &Session, line: &[u8]) -> ToolResponse {
        let (id, parsed) = parse_request(line);
        let (op, args) = match parsed {
            Ok(p) => p,
            Err(e) => return ToolResponse::failure(id, &e),
        };
        let id = id.expect("parsed requests carry an id");
        if !self.seen.insert(id) {
            return ToolResponse::failure(Some(id), &GccError::BadRequest(format!("duplicate id {id}")));
        }
        let result = Command::from_json(&op, args).and_then(|cmd| session.execute(&cmd));
        match result {
            Ok(outcome) => ToolResponse::success(Some(id), outcome.to_json()),
            Err(e) => ToolResponse::failure(Some(id), &e),
        }
    }
}

/// Serves requests until `input` is exhausted. Only I/O errors on the
/// streams themselves end the loop early.
pub fn serve(session: &Session, mut input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    let mut conn = Connection::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        let response = conn.handle_line(session, &buf);
        output.write_all(response.to_line().as_bytes())?;
        output.flush()?;
    }
    Ok(())
}
