//! On-disk `.GCC/` layout, the HEAD pointer, the advisory LOCK protocol, and
//! rename-based atomic file replacement.

use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant, SystemTime};

use chrono::TimeDelta;

use crate::clock::{format_timestamp, parse_timestamp, Clock};
use crate::error::{GccError, Result};
use crate::model::{render_metadata, render_roadmap, MetadataDoc, Roadmap};

pub const GCC_DIR: &str = ".GCC";
pub const DEFAULT_BRANCH: &str = "main";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RepoPaths {
    pub root: PathBuf,
    pub gcc_dir: PathBuf,
    pub main_file: PathBuf,
    pub branches_dir: PathBuf,
    pub head_file: PathBuf,
    pub lock_file: PathBuf,
    pub checkpoints_file: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchPaths {
    pub name: String,
    pub dir: PathBuf,
    pub commit_file: PathBuf,
    pub log_file: PathBuf,
    pub metadata_file: PathBuf,
}

impl RepoPaths {
    pub fn new(root: impl AsRef<Path>) -> io::Result<Self> {
        let root = std::path::absolute(root.as_ref())?;
        let gcc_dir = root.join(GCC_DIR);
        Ok(Self {
            main_file: gcc_dir.join("main.md"),
            branches_dir: gcc_dir.join("branches"),
            head_file: gcc_dir.join("HEAD"),
            lock_file: gcc_dir.join("LOCK"),
            checkpoints_file: gcc_dir.join("checkpoints.log"),
            gcc_dir,
            root,
        })
    }

    pub fn branch(&self, name: &str) -> BranchPaths {
        let dir = self.branches_dir.join(name);
        BranchPaths {
            name: name.to_owned(),
            commit_file: dir.join("commit.md"),
            log_file: dir.join("log.md"),
            metadata_file: dir.join("metadata.yaml"),
            dir,
        }
    }

    pub fn branch_exists(&self, name: &str) -> bool {
        is_valid_branch_name(name) && self.branches_dir.join(name).is_dir()
    }

    /// Existing branch names, sorted.
    pub fn list_branches(&self) -> Result<Vec<String>> {
        let mut names = Vec::new();
        for entry in fs::read_dir(&self.branches_dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            if let Some(name) = entry.file_name().to_str() {
                if is_valid_branch_name(name) {
                    names.push(name.to_owned());
                }
            }
        }
        names.sort();
        Ok(names)
    }
}

/// `[A-Za-z0-9._-]+`, excluding the `.` and `..` path components.
pub fn is_valid_branch_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && name.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b'-'))
}

pub fn validate_branch_name(name: &str) -> Result<()> {
    if is_valid_branch_name(name) {
        Ok(())
    } else {
        Err(GccError::InvalidName(name.to_owned()))
    }
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

pub fn atomic_write(path: &Path, content: &[u8]) -> io::Result<()> {
    atomic_write_with(path, content, |_| Ok(()))
}

/// Writes `content` to a sibling temp file, runs `before_rename` (a fault
/// injection point), then renames over `path`. On any failure the temp file
/// is removed and `path` keeps its previous bytes.
pub fn atomic_write_with(
    path: &Path,
    content: &[u8],
    before_rename: impl FnOnce(&Path) -> io::Result<()>,
) -> io::Result<()> {
    let parent = path
        .parent()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no parent"))?;
    let file_name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let temp = parent.join(format!(
        ".{}.tmp-{}-{}",
        file_name.to_string_lossy(),
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));

    let result = (|| {
        let mut file = OpenOptions::new().write(true).create_new(true).open(&temp)?;
        file.write_all(content)?;
        file.sync_all()?;
        drop(file);
        before_rename(&temp)?;
        fs::rename(&temp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&temp);
    }
    result
}

pub fn read_text(path: &Path) -> Result<String> {
    match fs::read(path) {
        Ok(bytes) => String::from_utf8(bytes)
            .map_err(|_| GccError::CorruptRepo(format!("{} is not valid UTF-8", path.display()))),
        Err(e) => Err(e.into()),
    }
}

/// Creates `.GCC/` with the roadmap, an empty `main` branch, and `HEAD`.
pub fn init_repo(root: impl AsRef<Path>, roadmap: &Roadmap) -> Result<RepoPaths> {
    let paths = RepoPaths::new(root)?;
    if paths.gcc_dir.exists() {
        return Err(GccError::AlreadyInitialized(paths.gcc_dir));
    }
    fs::create_dir(&paths.gcc_dir)?;
    fs::create_dir(&paths.branches_dir)?;
    atomic_write(&paths.main_file, render_roadmap(roadmap).as_bytes())?;
    create_branch_files(&paths.branch(DEFAULT_BRANCH), "", &MetadataDoc::with_default_segments())?;
    atomic_write(&paths.checkpoints_file, b"")?;
    atomic_write(&paths.head_file, format!("{DEFAULT_BRANCH}\n").as_bytes())?;
    Ok(paths)
}

pub(crate) fn create_branch_files(branch: &BranchPaths, commit_md: &str, metadata: &MetadataDoc) -> Result<()> {
    fs::create_dir(&branch.dir)?;
    atomic_write(&branch.log_file, b"")?;
    atomic_write(&branch.commit_file, commit_md.as_bytes())?;
    atomic_write(&branch.metadata_file, render_metadata(metadata).as_bytes())?;
    Ok(())
}

/// Locates an existing repository without writing anything.
pub fn open_repo(root: impl AsRef<Path>) -> Result<RepoPaths> {
    let paths = RepoPaths::new(root)?;
    if !paths.main_file.is_file() {
        return Err(GccError::NotARepo(paths.root));
    }
    let head = get_head(&paths)?;
    if !paths.branch_exists(&head) {
        return Err(GccError::CorruptRepo(format!("HEAD names missing branch {head:?}")));
    }
    Ok(paths)
}

/// Walks up from `start` to the nearest directory holding `.GCC/`.
pub fn discover_root(start: &Path) -> Option<PathBuf> {
    let start = std::path::absolute(start).ok()?;
    start
        .ancestors()
        .find(|dir| dir.join(GCC_DIR).is_dir())
        .map(Path::to_path_buf)
}

pub fn get_head(paths: &RepoPaths) -> Result<String> {
    let text = match fs::read_to_string(&paths.head_file) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => {
            return Err(GccError::CorruptRepo("HEAD is missing".into()))
        }
        Err(e) => return Err(e.into()),
    };
    let name = text.strip_suffix('\n').unwrap_or(&text);
    if !is_valid_branch_name(name) {
        return Err(GccError::CorruptRepo(format!("HEAD holds invalid branch name {name:?}")));
    }
    Ok(name.to_owned())
}

pub fn set_head(paths: &RepoPaths, name: &str) -> Result<()> {
    if !paths.branch_exists(name) {
        return Err(GccError::UnknownBranch(name.to_owned()));
    }
    atomic_write(&paths.head_file, format!("{name}\n").as_bytes())?;
    Ok(())
}

#[derive(Clone, Debug)]
pub struct LockConfig {
    pub holder: String,
    /// Locks older than this may be broken.
    pub stale_after: Duration,
    /// How long to poll for a fresh lock before giving up; `None` fails fast.
    pub wait: Option<Duration>,
}

impl Default for LockConfig {
    fn default() -> Self {
        Self {
            holder: format!("pid-{}", std::process::id()),
            stale_after: Duration::from_secs(300),
            wait: None,
        }
    }
}

struct LockGuard<'a> {
    path: &'a Path,
    contents: String,
}

impl Drop for LockGuard<'_> {
    fn drop(&mut self) {
        // Only release what we still own.
        if fs::read_to_string(self.path).ok().as_deref() == Some(self.contents.as_str()) {
            let _ = fs::remove_file(self.path);
        }
    }
}

enum Existing {
    Fresh { holder: String, since: String },
    Stale,
    Gone,
}

fn inspect_lock(path: &Path, config: &LockConfig, clock: &dyn Clock) -> io::Result<Existing> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Existing::Gone),
        Err(e) => return Err(e),
    };
    let parsed = text
        .trim_end_matches('\n')
        .split_once('\t')
        .and_then(|(holder, ts)| parse_timestamp(ts).map(|at| (holder.to_owned(), at)));
    let stale_after = TimeDelta::from_std(config.stale_after).unwrap_or(TimeDelta::MAX);
    match parsed {
        Some((holder, at)) => {
            if clock.now() - at > stale_after {
                Ok(Existing::Stale)
            } else {
                Ok(Existing::Fresh {
                    holder,
                    since: format_timestamp(&at),
                })
            }
        }
        // Torn or foreign contents: fall back to the file's age.
        None => {
            let age = fs::metadata(path)?
                .modified()
                .ok()
                .and_then(|m| SystemTime::now().duration_since(m).ok())
                .unwrap_or_default();
            if age > config.stale_after {
                Ok(Existing::Stale)
            } else {
                Ok(Existing::Fresh {
                    holder: "unknown".into(),
                    since: "unknown".into(),
                })
            }
        }
    }
}

/// Runs `action` while holding the repository's exclusive advisory lock.
pub fn with_lock<T>(
    paths: &RepoPaths,
    config: &LockConfig,
    clock: &dyn Clock,
    action: impl FnOnce() -> Result<T>,
) -> Result<T> {
    let started = Instant::now();
    let contents = format!("{}\t{}\n", config.holder, format_timestamp(&clock.now()));
    let _guard = loop {
        match OpenOptions::new().write(true).create_new(true).open(&paths.lock_file) {
            Ok(mut file) => {
                file.write_all(contents.as_bytes())?;
                file.sync_all()?;
                break LockGuard {
                    path: &paths.lock_file,
                    contents: contents.clone(),
                };
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                match inspect_lock(&paths.lock_file, config, clock)? {
                    Existing::Gone => continue,
                    Existing::Stale => {
                        log::warn!("breaking stale lock at {}", paths.lock_file.display());
                        match fs::remove_file(&paths.lock_file) {
                            Ok(()) => continue,
                            Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
                            Err(e) => return Err(e.into()),
                        }
                    }
                    Existing::Fresh { holder, since } => match config.wait {
                        Some(wait) if started.elapsed() < wait => {
                            std::thread::sleep(Duration::from_millis(20));
                        }
                        _ => return Err(GccError::LockHeld { holder, since }),
                    },
                }
            }
            Err(e) => return Err(e.into()),
        }
    };
    action()
}
