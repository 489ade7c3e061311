use std::fmt;
use std::io;

use serde::Serialize;

/// Stable machine-readable error codes, shared by the CLI (`error: <code>: ...`)
/// and the tool server (`{"error":{"code":...}}`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum ErrorCode {
    BadRequest,
    UnknownOp,
    UnknownBranch,
    UnknownCommit,
    AmbiguousCommit,
    UnknownSegment,
    BranchExists,
    InvalidName,
    EmptyMessage,
    SelfMerge,
    AlreadyMerged,
    StaleCursor,
    LockHeld,
    AlreadyInitialized,
    NotARepo,
    CorruptRepo,
    ParseError,
    VcsError,
    ScriptError,
    IoError,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 20] = [
        ErrorCode::BadRequest,
        ErrorCode::UnknownOp,
        ErrorCode::UnknownBranch,
        ErrorCode::UnknownCommit,
        ErrorCode::AmbiguousCommit,
        ErrorCode::UnknownSegment,
        ErrorCode::BranchExists,
        ErrorCode::InvalidName,
        ErrorCode::EmptyMessage,
        ErrorCode::SelfMerge,
        ErrorCode::AlreadyMerged,
        ErrorCode::StaleCursor,
        ErrorCode::LockHeld,
        ErrorCode::AlreadyInitialized,
        ErrorCode::NotARepo,
        ErrorCode::CorruptRepo,
        ErrorCode::ParseError,
        ErrorCode::VcsError,
        ErrorCode::ScriptError,
        ErrorCode::IoError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadRequest => "BadRequest",
            ErrorCode::UnknownOp => "UnknownOp",
            ErrorCode::UnknownBranch => "UnknownBranch",
            ErrorCode::UnknownCommit => "UnknownCommit",
            ErrorCode::AmbiguousCommit => "AmbiguousCommit",
            ErrorCode::UnknownSegment => "UnknownSegment",
            ErrorCode::BranchExists => "BranchExists",
            ErrorCode::InvalidName => "InvalidName",
            ErrorCode::EmptyMessage => "EmptyMessage",
            ErrorCode::SelfMerge => "SelfMerge",
            ErrorCode::AlreadyMerged => "AlreadyMerged",
            ErrorCode::StaleCursor => "StaleCursor",
            ErrorCode::LockHeld => "LockHeld",
            ErrorCode::AlreadyInitialized => "AlreadyInitialized",
            ErrorCode::NotARepo => "NotARepo",
            ErrorCode::CorruptRepo => "CorruptRepo",
            ErrorCode::ParseError => "ParseError",
            ErrorCode::VcsError => "VcsError",
            ErrorCode::ScriptError => "ScriptError",
            ErrorCode::IoError => "IoError",
        }
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Failure while parsing one of the `.GCC/` text formats.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GccError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    UnknownOp(String),
    #[error("{0}")]
    UnknownBranch(String),
    #[error("{0}")]
    UnknownCommit(String),
    #[error("{id} matches entries on branches {branches:?}")]
    AmbiguousCommit { id: String, branches: Vec<String> },
    #[error("{0}")]
    UnknownSegment(String),
    #[error("{0}")]
    BranchExists(String),
    #[error("{0}")]
    InvalidName(String),
    #[error("commit message must be a single non-empty line")]
    EmptyMessage,
    #[error("{0}")]
    SelfMerge(String),
    #[error("{0}")]
    AlreadyMerged(String),
    #[error("cursor no longer matches {0}")]
    StaleCursor(String),
    #[error("lock held by {holder} since {since}")]
    LockHeld { holder: String, since: String },
    #[error("{}", .0.display())]
    AlreadyInitialized(std::path::PathBuf),
    #[error("{}", .0.display())]
    NotARepo(std::path::PathBuf),
    #[error("{0}")]
    CorruptRepo(String),
    #[error("{file}: {source}")]
    Parse {
        file: String,
        #[source]
        source: ParseError,
    },
    #[error("{0}")]
    Vcs(String),
    #[error("{0}")]
    Script(String),
    #[error("{0}")]
    Io(#[from] io::Error),
}

impl GccError {
    pub fn code(&self) -> ErrorCode {
        match self {
            GccError::BadRequest(_) => ErrorCode::BadRequest,
            GccError::UnknownOp(_) => ErrorCode::UnknownOp,
            GccError::UnknownBranch(_) => ErrorCode::UnknownBranch,
            GccError::UnknownCommit(_) => ErrorCode::UnknownCommit,
            GccError::AmbiguousCommit { .. } => ErrorCode::AmbiguousCommit,
            GccError::UnknownSegment(_) => ErrorCode::UnknownSegment,
            GccError::BranchExists(_) => ErrorCode::BranchExists,
            GccError::InvalidName(_) => ErrorCode::InvalidName,
            GccError::EmptyMessage => ErrorCode::EmptyMessage,
            GccError::SelfMerge(_) => ErrorCode::SelfMerge,
            GccError::AlreadyMerged(_) => ErrorCode::AlreadyMerged,
            GccError::StaleCursor(_) => ErrorCode::StaleCursor,
            GccError::LockHeld { .. } => ErrorCode::LockHeld,
            GccError::AlreadyInitialized(_) => ErrorCode::AlreadyInitialized,
            GccError::NotARepo(_) => ErrorCode::NotARepo,
            GccError::CorruptRepo(_) => ErrorCode::CorruptRepo,
            GccError::Parse { .. } => ErrorCode::ParseError,
            GccError::Vcs(_) => ErrorCode::VcsError,
            GccError::Script(_) => ErrorCode::ScriptError,
            GccError::Io(_) => ErrorCode::IoError,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, source: ParseError) -> Self {
        GccError::Parse {
            file: file.into(),
            source,
        }
    }
}

pub type Result<T, E = GccError> = std::result::Result<T, E>;
