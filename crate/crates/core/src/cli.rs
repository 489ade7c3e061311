//! The `gcc` command line. [`run`] is the whole program minus the process
//! boundary, so tests drive it with an injected clock, environment and
//! streams.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::checkpoint::GitAdapter;
use crate::clock::{Clock, SystemClock};
use crate::command::{Command, ContextQuery, Session};
use crate::error::{GccError, Result};
use crate::model::parse_roadmap;
use crate::ops::{CommitRequest, MergeRequest};
use crate::replay::{self, ReplayScript};
use crate::retrieve::Direction;
use crate::store::discover_root;
use crate::summarizer::SummarizerSpec;

#[derive(Parser, Debug)]
#[command(name = "gcc", about = "Versioned memory for long-horizon agents", version)]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Print a single JSON object instead of plain text.
    #[arg(long, global = true)]
    json: bool,
    /// Pipe summaries through this shell command instead of the built-in fold.
    #[arg(long, global = true, value_name = "CMD")]
    summarizer: Option<String>,
    /// Also snapshot the workspace with git on every commit and merge.
    #[arg(long, global = true)]
    git: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Create .GCC/ with a roadmap and the main branch.
    Init {
        #[arg(long)]
        goal: String,
        /// Milestone; repeatable.
        #[arg(long)]
        todo: Vec<String>,
    },
    /// Append an Observation-Thought-Action record to the current branch log.
    Ota {
        #[arg(short, long, default_value = "")]
        observation: String,
        #[arg(short, long, default_value = "")]
        thought: String,
        #[arg(short, long, default_value = "")]
        action: String,
    },
    /// Checkpoint progress on the current branch.
    Commit {
        #[arg(short, long)]
        message: String,
        #[command(flatten)]
        contribution: TextSource,
        /// Replace main.md with this roadmap file.
        #[arg(long, value_name = "FILE")]
        roadmap_file: Option<PathBuf>,
    },
    /// Create a branch from the current one and switch to it.
    Branch {
        name: String,
        #[arg(short, long, default_value = "")]
        purpose: String,
    },
    /// Switch HEAD to an existing branch.
    Checkout { name: String },
    /// Merge a branch into the current one.
    Merge {
        target: String,
        #[command(flatten)]
        synthesis: SynthesisSource,
        #[arg(short, long)]
        purpose: Option<String>,
        #[arg(long, value_name = "FILE")]
        roadmap_file: Option<PathBuf>,
    },
    /// Retrieve memory at some granularity.
    Context {
        #[arg(long)]
        branch: Option<String>,
        #[arg(long, value_name = "HASH")]
        commit: Option<String>,
        #[arg(long)]
        log: bool,
        #[arg(long, value_name = "SEGMENT")]
        metadata: Option<String>,
    },
    /// Move a context window.
    Scroll {
        direction: ScrollDirection,
        #[arg(long)]
        cursor: String,
    },
    /// List the checkpoint ledger.
    Checkpoints,
    /// Serve JSON-lines tool requests on stdin/stdout.
    Serve,
    /// Run a replay script and print the final digest.
    Replay {
        script: PathBuf,
        /// Also resume from this step in a second root and compare.
        #[arg(long, requires = "resume_root")]
        split: Option<usize>,
        #[arg(long, value_name = "DIR")]
        resume_root: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct TextSource {
    #[arg(short, long)]
    contribution: Option<String>,
    /// Read the contribution from a file, or stdin for `-`.
    #[arg(long, value_name = "FILE")]
    contribution_file: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(multiple = false)]
struct SynthesisSource {
    #[arg(short, long)]
    synthesis: Option<String>,
    #[arg(long, value_name = "FILE")]
    synthesis_file: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScrollDirection {
    Up,
    Down,
}

/// What the process would otherwise take from its surroundings.
#[derive(Clone)]
pub struct Env {
    pub cwd: PathBuf,
    /// `GCC_ROOT`.
    pub gcc_root: Option<PathBuf>,
    pub clock: Arc<dyn Clock>,
}

impl Env {
    pub fn from_process() -> io::Result<Self> {
        Ok(Self {
            cwd: std::env::current_dir()?,
            gcc_root: std::env::var_os("GCC_ROOT").map(PathBuf::from),
            clock: Arc::new(SystemClock),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Captured {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// [`run`] with in-memory streams.
pub fn run_captured<S: AsRef<str>>(argv: &[S], env: &Env, stdin: &[u8]) -> Captured {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(argv.iter().map(AsRef::as_ref), env, &mut &stdin[..], &mut out, &mut err);
    Captured {
        code,
        stdout: String::from_utf8_lossy(&out).into_owned(),
        stderr: String::from_utf8_lossy(&err).into_owned(),
    }
}

/// Runs one invocation; returns the exit code (0 ok, 1 domain error, 2 usage).
pub fn run<I, T>(argv: I, env: &Env, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(text.as_bytes());
                2
            } else {
                let _ = stdout.write_all(text.as_bytes());
                0
            };
        }
    };
    match dispatch(cli, env, stdin, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}: {}", e.code(), e);
            1
        }
    }
}

fn read_source(path: &Path, cwd: &Path, stdin: &mut dyn BufRead) -> Result<String> {
    if path == Path::new("-") {
        let mut text = String::new();
        stdin
            .read_to_string(&mut text)
            .map_err(|e| GccError::BadRequest(format!("reading stdin: {e}")))?;
        return Ok(text);
    }
    fs::read_to_string(cwd.join(path)).map_err(|e| GccError::BadRequest(format!("{}: {e}", path.display())))
}

fn text_arg(inline: Option<String>, file: Option<PathBuf>, cwd: &Path, stdin: &mut dyn BufRead) -> Result<String> {
    match (inline, file) {
        (Some(text), _) => Ok(text),
        (None, Some(path)) => read_source(&path, cwd, stdin),
        (None, None) => Ok(String::new()),
    }
}

fn roadmap_arg(file: Option<PathBuf>, cwd: &Path, stdin: &mut dyn BufRead) -> Result<Option<crate::model::Roadmap>> {
    file.map(|path| {
        let text = read_source(&path, cwd, stdin)?;
        parse_roadmap(&text).map_err(|e| GccError::BadRequest(format!("{}: {e}", path.display())))
    })
    .transpose()
}

fn resolve_root(env: &Env, for_init: bool) -> Result<PathBuf> {
    if let Some(root) = &env.gcc_root {
        return Ok(env.cwd.join(root));
    }
    if for_init {
        return Ok(env.cwd.clone());
    }
    discover_root(&env.cwd).ok_or_else(|| GccError::NotARepo(env.cwd.clone()))
}

fn session(cli: &Cli, env: &Env, root: PathBuf) -> Result<Session> {
    let mut session = Session::new(root).with_clock(env.clock.clone());
    if let Some(cmd) = &cli.summarizer {
        let spec = SummarizerSpec::external(cmd.clone());
        spec.validate().map_err(GccError::BadRequest)?;
        session.summarizer = spec;
    }
    if cli.git {
        session.vcs = Some(Arc::new(GitAdapter));
    }
    Ok(session)
}

fn emit(stdout: &mut dyn Write, text: &str) -> Result<()> {
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

fn dispatch(mut cli: Cli, env: &Env, stdin: &mut dyn BufRead, stdout: &mut dyn Write) -> Result<i32> {
    let cwd = env.cwd.as_path();
    let command = match cli.command {
        Sub::Serve => {
            let session = session(&cli, env, resolve_root(env, false)?)?;
            crate::toolserver::serve(&session, stdin, stdout)?;
            return Ok(0);
        }
        Sub::Replay {
            ref script,
            split,
            ref resume_root,
        } => return replay_cmd(cli.json, env, script, split, resume_root.as_deref(), stdout),
        Sub::Init { ref goal, ref todo } => Command::Init {
            goal: goal.clone(),
            todo: todo.clone(),
        },
        Sub::Ota {
            ref observation,
            ref thought,
            ref action,
        } => Command::Ota {
            observation: observation.clone(),
            thought: thought.clone(),
            action: action.clone(),
        },
        Sub::Commit {
            ref message,
            ref mut contribution,
            ref mut roadmap_file,
        } => Command::Commit(CommitRequest {
            message: message.clone(),
            contribution: text_arg(contribution.contribution.take(), contribution.contribution_file.take(), cwd, stdin)?,
            revise_roadmap: roadmap_arg(roadmap_file.take(), cwd, stdin)?,
            metadata_updates: None,
        }),
        Sub::Branch { ref name, ref purpose } => Command::Branch {
            name: name.clone(),
            purpose: purpose.clone(),
        },
        Sub::Checkout { ref name } => Command::Checkout { name: name.clone() },
        Sub::Merge {
            ref target,
            ref mut synthesis,
            ref purpose,
            ref mut roadmap_file,
        } => Command::Merge(MergeRequest {
            target: target.clone(),
            synthesis: text_arg(synthesis.synthesis.take(), synthesis.synthesis_file.take(), cwd, stdin)?,
            updated_purpose: purpose.clone(),
            roadmap_update: roadmap_arg(roadmap_file.take(), cwd, stdin)?,
        }),
        Sub::Context {
            ref branch,
            ref commit,
            log,
            ref metadata,
        } => Command::Context(ContextQuery::resolve(branch.clone(), commit.clone(), log, metadata.clone())?),
        Sub::Scroll { direction, ref cursor } => Command::Scroll {
            cursor: cursor.clone(),
            direction: match direction {
                ScrollDirection::Up => Direction::Up,
                ScrollDirection::Down => Direction::Down,
            },
        },
        Sub::Checkpoints => Command::Checkpoints,
    };
    let root = resolve_root(env, matches!(command, Command::Init { .. }))?;
    let outcome = session(&cli, env, root)?.execute(&command)?;
    if cli.json {
        emit(stdout, &format!("{}\n", outcome.to_json()))?;
    } else {
        emit(stdout, &outcome.to_plain())?;
    }
    Ok(0)
}

fn replay_cmd(
    json: bool,
    env: &Env,
    script: &Path,
    split: Option<usize>,
    resume_root: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<i32> {
    let text = fs::read_to_string(env.cwd.join(script))
        .map_err(|e| GccError::Script(format!("{}: {e}", script.display())))?;
    let parsed = ReplayScript::parse(&text)?;
    let root = resolve_root(env, true)?;
    let (run, handoff) = match (split, resume_root) {
        (Some(split), Some(other)) => {
            let report = replay::handoff(&parsed, split, &root, &env.cwd.join(other))?;
            let equal = report.digests_equal();
            (report.full, Some((report.resumed.digest, equal)))
        }
        _ => (replay::run_script(&parsed, &root)?, None),
    };
    let failed = !run.failures.is_empty() || handoff.as_ref().is_some_and(|(_, eq)| !eq);
    if json {
        let mut value = json!({
            "steps": run.transcript.len(),
            "digest": run.digest,
            "failures": run.failures,
        });
        if let Some((digest, equal)) = &handoff {
            value["resumed_digest"] = json!(digest);
            value["handoff_equal"] = json!(equal);
        }
        emit(stdout, &format!("{value}\n"))?;
    } else {
        let mut out = format!("steps: {}\ndigest: {}\n", run.transcript.len(), run.digest);
        if let Some((digest, equal)) = &handoff {
            out.push_str(&format!("resumed digest: {digest}\nhandoff: {}\n", if *equal { "equal" } else { "DIFFERENT" }));
        }
        for f in &run.failures {
            out.push_str(&format!("step {}: {}\n", f.step, f.reason));
        }
        emit(stdout, &out)?;
    }
    Ok(i32::from(failed))
}
