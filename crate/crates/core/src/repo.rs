use std::io;
use std::path::Path;
use std::sync::Arc;

use crate::checkpoint::VcsAdapter;
use crate::clock::{Clock, SystemClock};
use crate::error::{GccError, Result};
use crate::model::{parse_commit_file, parse_log, parse_metadata, parse_roadmap, CommitEntry, MetadataDoc, OtaRecord, Roadmap};
use crate::store::{self, BranchPaths, LockConfig, RepoPaths};
use crate::summarizer::{Summarizer, SummarizerSpec};

/// Called with the temp file path right before each rename; returning an
/// error aborts that write.
pub type WriteFault = Arc<dyn Fn(&Path) -> io::Result<()> + Send + Sync>;

/// Handle on an open `.GCC/` repository plus the collaborators its commands
/// use. Holds no cached repository state: every call reads from disk.
#[derive(Clone)]
pub struct Repository {
    pub(crate) paths: RepoPaths,
    pub(crate) clock: Arc<dyn Clock>,
    pub(crate) summarizer: Summarizer,
    pub(crate) vcs: Option<Arc<dyn VcsAdapter>>,
    pub(crate) lock: LockConfig,
    pub(crate) write_fault: Option<WriteFault>,
}

impl std::fmt::Debug for Repository {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Repository")
            .field("root", &self.paths.root)
            .field("summarizer", self.summarizer.spec())
            .field("vcs", &self.vcs.is_some())
            .finish()
    }
}

impl Repository {
    fn from_paths(paths: RepoPaths) -> Self {
        Self {
            paths,
            clock: Arc::new(SystemClock),
            summarizer: Summarizer::default(),
            vcs: None,
            lock: LockConfig::default(),
            write_fault: None,
        }
    }

    pub fn init(root: impl AsRef<Path>, goal: &str, todo: &[String]) -> Result<Self> {
        let roadmap = Roadmap::new(goal, todo.iter().cloned());
        roadmap.validate().map_err(GccError::BadRequest)?;
        store::init_repo(root, &roadmap).map(Self::from_paths)
    }

    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        store::open_repo(root).map(Self::from_paths)
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_summarizer(mut self, spec: SummarizerSpec) -> Self {
        self.summarizer = Summarizer::new(spec);
        self
    }

    pub fn with_vcs(mut self, vcs: Arc<dyn VcsAdapter>) -> Self {
        self.vcs = Some(vcs);
        self
    }

    pub fn with_lock_config(mut self, lock: LockConfig) -> Self {
        self.lock = lock;
        self
    }

    pub fn with_write_fault(mut self, fault: Option<WriteFault>) -> Self {
        self.write_fault = fault;
        self
    }

    pub fn paths(&self) -> &RepoPaths {
        &self.paths
    }

    pub fn summarizer(&self) -> &Summarizer {
        &self.summarizer
    }

    pub fn head(&self) -> Result<String> {
        store::get_head(&self.paths)
    }

    pub fn branches(&self) -> Result<Vec<String>> {
        self.paths.list_branches()
    }

    pub(crate) fn existing_branch(&self, name: &str) -> Result<BranchPaths> {
        if self.paths.branch_exists(name) {
            Ok(self.paths.branch(name))
        } else {
            Err(GccError::UnknownBranch(name.to_owned()))
        }
    }

    pub(crate) fn write(&self, path: &Path, content: &str) -> Result<()> {
        match &self.write_fault {
            Some(fault) => store::atomic_write_with(path, content.as_bytes(), |tmp| fault(tmp))?,
            None => store::atomic_write(path, content.as_bytes())?,
        }
        Ok(())
    }

    pub(crate) fn locked<T>(&self, action: impl FnOnce() -> Result<T>) -> Result<T> {
        store::with_lock(&self.paths, &self.lock, self.clock.as_ref(), action)
    }

    pub fn read_roadmap(&self) -> Result<Roadmap> {
        let text = store::read_text(&self.paths.main_file)?;
        parse_roadmap(&text).map_err(|e| GccError::CorruptRepo(format!("main.md: {e}")))
    }

    pub fn read_commits(&self, branch: &str) -> Result<Vec<CommitEntry>> {
        let bp = self.existing_branch(branch)?;
        let text = store::read_text(&bp.commit_file)?;
        parse_commit_file(&text).map_err(|e| GccError::parse(format!("branches/{branch}/commit.md"), e))
    }

    pub fn read_log_text(&self, branch: &str) -> Result<String> {
        let bp = self.existing_branch(branch)?;
        store::read_text(&bp.log_file)
    }

    pub fn read_log(&self, branch: &str) -> Result<Vec<OtaRecord>> {
        let text = self.read_log_text(branch)?;
        parse_log(&text).map_err(|e| GccError::parse(format!("branches/{branch}/log.md"), e))
    }

    pub fn read_metadata(&self, branch: &str) -> Result<MetadataDoc> {
        let bp = self.existing_branch(branch)?;
        let text = store::read_text(&bp.metadata_file)?;
        parse_metadata(&text).map_err(|e| GccError::parse(format!("branches/{branch}/metadata.yaml"), e))
    }

    /// Progress a branch carries forward: its latest entry's summary folded
    /// with that entry's contribution.
    pub(crate) fn progress_of(&self, entry: Option<&CommitEntry>) -> String {
        entry
            .map(|e| self.summarizer.fold(&e.previous_progress, &e.contribution).text)
            .unwrap_or_default()
    }
}
