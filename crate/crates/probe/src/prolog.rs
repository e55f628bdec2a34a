//! SWI-Prolog subprocess harness: runs a program in a scratch directory next
//! to its axioms and reports the decision with inference and choice counts.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use probe_core::prolog::executable_source;
use probe_core::{ExecutionTrace, OptionSide};
use sha2::{Digest, Sha256};
use wait_timeout::ChildExt;

const RUNNER: &str = include_str!("runner.pl");

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrologError {
    #[error("engine-missing: cannot run `{binary}`: {reason}")]
    EngineMissing { binary: String, reason: String },
    #[error("engine-io: {0}")]
    Io(String),
    #[error("engine-crash: exit status {status:?}, stderr: {stderr}")]
    Crash { status: Option<i32>, stderr: String },
    #[error("timeout: goal did not finish within {0:?}")]
    Timeout(Duration),
    #[error("syntax-error: {0}")]
    Syntax(String),
    #[error("goal-failed: {0}")]
    GoalFailed(String),
    #[error("exception: {0}")]
    Exception(String),
    #[error("nonground: decision `{0}` is not ground")]
    NonGround(String),
    #[error("invalid-decision: `{0}` is neither option_A nor option_B")]
    InvalidDecision(String),
}

impl PrologError {
    /// Failures of the machinery rather than of the program under test.
    pub fn is_infrastructure(&self) -> bool {
        matches!(
            self,
            PrologError::EngineMissing { .. } | PrologError::Io(_) | PrologError::Crash { .. }
        )
    }

    /// Short tag for ledgers and trail metrics.
    pub fn kind(&self) -> &'static str {
        match self {
            PrologError::EngineMissing { .. } => "engine-missing",
            PrologError::Io(_) => "engine-io",
            PrologError::Crash { .. } => "engine-crash",
            PrologError::Timeout(_) => "timeout",
            PrologError::Syntax(_) => "syntax-error",
            PrologError::GoalFailed(_) => "goal-failed",
            PrologError::Exception(_) => "exception",
            PrologError::NonGround(_) => "nonground",
            PrologError::InvalidDecision(_) => "invalid-decision",
        }
    }
}

pub trait PrologEngine: Send + Sync {
    /// Runs `decide_option(user, Choice)` for `program` with `axioms`
    /// available as `axioms.pl`.
    fn execute(&self, axioms: &str, program: &str) -> Result<ExecutionTrace, PrologError>;
}

/// SWI-Prolog invoked as `swipl --quiet -g probe_main -t halt runner.pl`.
#[derive(Debug)]
pub struct SwiProlog {
    binary: PathBuf,
    timeout: Duration,
    memo: Mutex<HashMap<[u8; 32], Result<ExecutionTrace, PrologError>>>,
}

impl SwiProlog {
    /// A relative path with a directory part is anchored at the current
    /// directory, since the engine runs inside a scratch directory.
    pub fn new(binary: impl Into<PathBuf>, timeout: Duration) -> Self {
        let binary: PathBuf = binary.into();
        let binary = match std::env::current_dir() {
            Ok(cwd) if binary.is_relative() && binary.components().count() > 1 => cwd.join(binary),
            _ => binary,
        };
        Self {
            binary,
            timeout,
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// `PROBE_SWIPL` if set, otherwise `swipl` from `PATH`.
    pub fn from_env(timeout: Duration) -> Self {
        let binary = std::env::var_os("PROBE_SWIPL")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("swipl"));
        Self::new(binary, timeout)
    }

    pub fn binary(&self) -> &Path {
        &self.binary
    }

    /// Runs `--version` to confirm the engine can be started.
    pub fn version(&self) -> Result<String, PrologError> {
        let missing = |reason: String| PrologError::EngineMissing {
            binary: self.binary.display().to_string(),
            reason,
        };
        let out = Command::new(&self.binary)
            .arg("--version")
            .stdin(Stdio::null())
            .output()
            .map_err(|e| missing(e.to_string()))?;
        if !out.status.success() {
            return Err(missing(format!("--version exited with {}", out.status)));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_string())
    }

    fn run(&self, axioms: &str, program: &str) -> Result<ExecutionTrace, PrologError> {
        let io = |e: std::io::Error| PrologError::Io(e.to_string());
        let dir = tempfile::Builder::new()
            .prefix("probe-prolog-")
            .tempdir()
            .map_err(io)?;
        fs::write(dir.path().join("axioms.pl"), axioms).map_err(io)?;
        fs::write(dir.path().join("program.pl"), executable_source(program)).map_err(io)?;
        fs::write(dir.path().join("runner.pl"), RUNNER).map_err(io)?;

        let started = Instant::now();
        let mut child = Command::new(&self.binary)
            .args(["--quiet", "-g", "probe_main", "-t", "halt", "runner.pl"])
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| PrologError::EngineMissing {
                binary: self.binary.display().to_string(),
                reason: e.to_string(),
            })?;
        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());
        let status = match child.wait_timeout(self.timeout).map_err(io)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(PrologError::Timeout(self.timeout));
            }
        };
        let wall_time = started.elapsed();
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();
        let mut trace = interpret(status.code(), &stdout, &stderr)?;
        trace.wall_time = wall_time;
        Ok(trace)
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}

fn tagged<'a>(stdout: &'a str, tag: &str) -> Option<&'a str> {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(tag))
        .map(str::trim)
}

fn interpret(code: Option<i32>, stdout: &str, stderr: &str) -> Result<ExecutionTrace, PrologError> {
    let detail = |tag: &str| {
        tagged(stdout, tag)
            .map(str::to_string)
            .unwrap_or_else(|| stderr.trim().to_string())
    };
    match code {
        Some(0) => {}
        Some(3) => return Err(PrologError::Syntax(detail("PROBE_load_error "))),
        Some(4) => return Err(PrologError::GoalFailed(detail("PROBE_goal_failed "))),
        Some(5) => return Err(PrologError::Exception(detail("PROBE_exception "))),
        Some(6) => return Err(PrologError::NonGround(detail("PROBE_nonground "))),
        status => {
            return Err(PrologError::Crash {
                status,
                stderr: stderr.trim().to_string(),
            })
        }
    }
    let line = tagged(stdout, "PROBE_RESULT ").ok_or_else(|| PrologError::Crash {
        status: Some(0),
        stderr: format!("no result line in output: {}", stdout.trim()),
    })?;
    let mut parts = line.split_whitespace();
    let (Some(choice), Some(inf), Some(cho), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return Err(PrologError::Crash {
            status: Some(0),
            stderr: format!("malformed result line `{line}`"),
        });
    };
    let decision = match choice {
        "option_A" => OptionSide::A,
        "option_B" => OptionSide::B,
        other => return Err(PrologError::InvalidDecision(other.to_string())),
    };
    let count = |s: &str| {
        s.parse::<u64>().map_err(|_| PrologError::Crash {
            status: Some(0),
            stderr: format!("malformed count in `{line}`"),
        })
    };
    Ok(ExecutionTrace::new(decision, count(inf)?, count(cho)?))
}

impl PrologEngine for SwiProlog {
    /// Results are memoized by content, since a fixed program always yields
    /// the same trace. Infrastructure errors are not memoized.
    fn execute(&self, axioms: &str, program: &str) -> Result<ExecutionTrace, PrologError> {
        let mut h = Sha256::new();
        h.update((axioms.len() as u64).to_le_bytes());
        h.update(axioms);
        h.update(program);
        let key: [u8; 32] = h.finalize().into();
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&key) {
            return hit.clone();
        }
        let result = self.run(axioms, program);
        if !matches!(&result, Err(e) if e.is_infrastructure()) {
            self.memo
                .lock()
                .expect("memo lock")
                .insert(key, result.clone());
        }
        result
    }
}
