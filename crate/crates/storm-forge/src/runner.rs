//! Subprocess execution of solver binaries under resource limits, verdict
//! parsing, and bug classification.
//!
//! Every spawned solver gets its own process group so that an expired
//! timeout kills the solver and anything it forked. Verdict parsing is
//! total: any byte stream maps to exactly one verdict.

use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Captured output is capped at this many bytes per stream; the rest is
/// drained and discarded so the child never blocks on a full pipe.
const CAPTURE_CAP: usize = 8 * 1024 * 1024;
/// Excerpts stored in outcomes and reports.
const EXCERPT_CAP: usize = 64 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    File,
    Pipe,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverProfile {
    pub id: String,
    pub binary: PathBuf,
    /// Argument template; in file mode exactly one argument must be or
    /// contain the `{file}` placeholder.
    pub args: Vec<String>,
    pub incremental: bool,
    pub timeout: Duration,
    pub memory_limit_mb: Option<u64>,
    pub input_mode: InputMode,
}

impl SolverProfile {
    pub fn validate(&self) -> Result<()> {
        if self.timeout.is_zero() {
            return Err(Error::Config(format!(
                "solver {}: timeout must be positive",
                self.id
            )));
        }
        let placeholders = self
            .args
            .iter()
            .filter(|a| a.contains("{file}"))
            .count();
        match self.input_mode {
            InputMode::File if placeholders != 1 => Err(Error::Config(format!(
                "solver {}: file mode needs exactly one {{file}} argument, found {placeholders}",
                self.id
            ))),
            InputMode::Pipe if placeholders != 0 => Err(Error::Config(format!(
                "solver {}: pipe mode must not use a {{file}} argument",
                self.id
            ))),
            _ => Ok(()),
        }
    }
}

/// What a single solver process did, before verdict interpretation.
#[derive(Debug)]
pub struct RawRun {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: Option<i32>,
    pub signal: Option<i32>,
    pub timed_out: bool,
    pub wall: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Sat,
    Unsat,
    Unknown,
    Timeout,
    Crash,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Sat => "sat",
            Verdict::Unsat => "unsat",
            Verdict::Unknown => "unknown",
            Verdict::Timeout => "timeout",
            Verdict::Crash => "crash",
        }
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct SolverOutcome {
    pub verdict: Verdict,
    /// one answer per check-sat point the solver got to
    pub answers: Vec<Verdict>,
    pub stdout_excerpt: String,
    pub stderr_excerpt: String,
    pub exit_code: Option<i32>,
    pub wall: Duration,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BugClass {
    A,
    C,
    D,
}

impl std::fmt::Display for BugClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BugClass::A => "A",
            BugClass::C => "C",
            BugClass::D => "D",
        })
    }
}

/// One row of runs.jsonl.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: String,
    pub iter: u64,
    pub solver: String,
    pub verdict: Verdict,
    /// whole seconds, floored; timeouts record the configured limit
    pub wall_time: u64,
    pub exit_code: Option<i32>,
    pub instance_path: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BugReport {
    pub class: BugClass,
    pub solver: String,
    pub logic: Option<String>,
    pub seed_file: String,
    pub rng_seed: u64,
    pub iter: u64,
    pub verdict: Verdict,
    pub exit_code: Option<i32>,
    pub instance_path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimized_path: Option<String>,
    pub stdout_excerpt: String,
    pub stderr_excerpt: String,
}

pub enum InstanceInput<'a> {
    OnDisk(&'a Path),
    Text(&'a str),
}

/// Run a solver on one instance and return the raw streams.
pub fn execute(profile: &SolverProfile, input: InstanceInput<'_>) -> Result<RawRun> {
    let mut scratch: Option<ScratchFile> = None;
    let (file_path, stdin_text): (Option<PathBuf>, Option<String>) = match profile.input_mode {
        InputMode::File => {
            let path = match input {
                InstanceInput::OnDisk(p) => p.to_path_buf(),
                InstanceInput::Text(text) => {
                    let s = ScratchFile::write(text)?;
                    let p = s.path.clone();
                    scratch = Some(s);
                    p
                }
            };
            (Some(path), None)
        }
        InputMode::Pipe => {
            let text = match input {
                InstanceInput::OnDisk(p) => std::fs::read_to_string(p)?,
                InstanceInput::Text(t) => t.to_string(),
            };
            (None, Some(text))
        }
    };

    let mut cmd = Command::new(&profile.binary);
    for arg in &profile.args {
        match &file_path {
            Some(p) if arg.contains("{file}") => {
                cmd.arg(arg.replace("{file}", &p.to_string_lossy()));
            }
            _ => {
                cmd.arg(arg);
            }
        }
    }
    cmd.stdout(Stdio::piped()).stderr(Stdio::piped());
    cmd.stdin(if stdin_text.is_some() {
        Stdio::piped()
    } else {
        Stdio::null()
    });

    let memory_limit = profile.memory_limit_mb;
    unsafe {
        cmd.pre_exec(move || {
            // own process group, so the parent can kill the whole tree
            if libc::setpgid(0, 0) != 0 {
                return Err(std::io::Error::last_os_error());
            }
            if let Some(mb) = memory_limit {
                let bytes = mb.saturating_mul(1024 * 1024);
                let lim = libc::rlimit {
                    rlim_cur: bytes,
                    rlim_max: bytes,
                };
                // best effort; a solver that cannot allocate will crash or
                // report unknown, both of which we classify anyway
                libc::setrlimit(libc::RLIMIT_AS, &lim);
            }
            Ok(())
        });
    }

    let started = Instant::now();
    let mut child = cmd.spawn().map_err(|e| Error::Spawn {
        binary: profile.binary.display().to_string(),
        message: e.to_string(),
    })?;
    let pid = child.id() as i32;

    let stdin_writer = child.stdin.take().map(|mut pipe| {
        let text = stdin_text.unwrap_or_default();
        std::thread::spawn(move || {
            // a solver may exit without reading everything; EPIPE is fine
            let _ = pipe.write_all(text.as_bytes());
        })
    });
    let stdout_reader = child.stdout.take().map(|s| spawn_reader(Box::new(s)));
    let stderr_reader = child.stderr.take().map(|s| spawn_reader(Box::new(s)));

    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() >= profile.timeout {
            timed_out = true;
            unsafe {
                libc::killpg(pid, libc::SIGKILL);
                libc::kill(pid, libc::SIGKILL);
            }
            break child.wait()?;
        }
        std::thread::sleep(Duration::from_millis(2));
    };
    let wall = started.elapsed();

    let stdout = stdout_reader
        .map(|h| h.join().unwrap_or_default())
        .unwrap_or_default();
    let stderr = stderr_reader
        .map(|h| h.join().unwrap_or_default())
        .unwrap_or_default();
    if let Some(w) = stdin_writer {
        let _ = w.join();
    }
    drop(scratch);

    Ok(RawRun {
        stdout,
        stderr,
        exit_code: status.code(),
        signal: status.signal(),
        timed_out,
        wall,
    })
}

fn spawn_reader(
    mut stream: Box<dyn Read + Send>,
) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut kept = Vec::with_capacity(4096);
        let mut buf = [0u8; 8192];
        loop {
            match stream.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = CAPTURE_CAP.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                    // keep draining past the cap so the child never stalls
                }
            }
        }
        String::from_utf8_lossy(&kept).into_owned()
    })
}

/// Scratch file for running file-mode solvers on in-memory text.
struct ScratchFile {
    path: PathBuf,
}

impl ScratchFile {
    fn write(text: &str) -> Result<ScratchFile> {
        static COUNTER: AtomicU64 = AtomicU64::new(0);
        let n = COUNTER.fetch_add(1, Ordering::Relaxed);
        let path = std::env::temp_dir().join(format!(
            "storm-forge-{}-{n}.smt2",
            std::process::id()
        ));
        std::fs::write(&path, text)?;
        Ok(ScratchFile { path })
    }
}

impl Drop for ScratchFile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

/// Whole-line verdict tokens, in stream order.
pub fn parse_answers(stdout: &str) -> Vec<Verdict> {
    stdout
        .lines()
        .filter_map(|line| match line.trim() {
            "sat" => Some(Verdict::Sat),
            "unsat" => Some(Verdict::Unsat),
            "unknown" => Some(Verdict::Unknown),
            _ => None,
        })
        .collect()
}

fn worst_answer(answers: &[Verdict]) -> Verdict {
    if answers.contains(&Verdict::Unsat) {
        Verdict::Unsat
    } else if answers.contains(&Verdict::Unknown) {
        Verdict::Unknown
    } else {
        Verdict::Sat
    }
}

fn excerpt(text: &str) -> String {
    if text.len() <= EXCERPT_CAP {
        return text.to_string();
    }
    let mut cut = EXCERPT_CAP;
    while !text.is_char_boundary(cut) {
        cut -= 1;
    }
    format!("{}…[truncated]", &text[..cut])
}

/// Interpret a raw run. Timeout wins over everything; then any parsed
/// answer tokens (worst one for incremental runs); a token-less nonzero
/// exit is a crash; a token-less clean exit is unknown.
pub fn interpret(raw: &RawRun) -> SolverOutcome {
    let answers = parse_answers(&raw.stdout);
    let verdict = if raw.timed_out {
        Verdict::Timeout
    } else if !answers.is_empty() {
        worst_answer(&answers)
    } else if raw.exit_code.unwrap_or(0) != 0 || raw.signal.is_some() {
        Verdict::Crash
    } else {
        Verdict::Unknown
    };
    SolverOutcome {
        verdict,
        answers,
        stdout_excerpt: excerpt(&raw.stdout),
        stderr_excerpt: excerpt(&raw.stderr),
        exit_code: raw.exit_code,
        wall: raw.wall,
    }
}

/// Run and interpret in one step.
pub fn run_solver(profile: &SolverProfile, input: InstanceInput<'_>) -> Result<SolverOutcome> {
    let raw = execute(profile, input)?;
    Ok(interpret(&raw))
}

/// Is `logic` on the decidable-fragment list? Entries may end in `*` for
/// prefix matching; the default list is `QF_*`.
pub fn is_decidable(logic: Option<&str>, list: &[String]) -> bool {
    let Some(logic) = logic else { return false };
    list.iter().any(|entry| match entry.strip_suffix('*') {
        Some(prefix) => logic.starts_with(prefix),
        None => logic == entry,
    })
}

/// Ground truth is sat by construction, so: unsat is a critical soundness
/// bug, unknown on a decidable fragment is an incompleteness bug, a crash
/// is a robustness bug, and sat or timeout is no bug at all.
pub fn classify(
    outcome: &SolverOutcome,
    logic: Option<&str>,
    decidable: &[String],
) -> Option<BugClass> {
    match outcome.verdict {
        Verdict::Unsat => Some(BugClass::A),
        Verdict::Unknown if is_decidable(logic, decidable) => Some(BugClass::C),
        Verdict::Crash => Some(BugClass::D),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sh_profile(script: &str, timeout_ms: u64) -> SolverProfile {
        SolverProfile {
            id: "sh".into(),
            binary: "/bin/sh".into(),
            args: vec!["-c".into(), script.into(), "sh".into(), "{file}".into()],
            incremental: false,
            timeout: Duration::from_millis(timeout_ms),
            memory_limit_mb: None,
            input_mode: InputMode::File,
        }
    }

    #[test]
    fn verdict_tokens_must_fill_the_line() {
        let v = parse_answers("c unsat core follows\nsat\n  unknown  \nunsatisfied\n");
        assert_eq!(v, [Verdict::Sat, Verdict::Unknown]);
    }

    #[test]
    fn incremental_aggregation_takes_the_worst() {
        assert_eq!(worst_answer(&[Verdict::Sat, Verdict::Sat]), Verdict::Sat);
        assert_eq!(
            worst_answer(&[Verdict::Sat, Verdict::Unknown, Verdict::Sat]),
            Verdict::Unknown
        );
        assert_eq!(
            worst_answer(&[Verdict::Unknown, Verdict::Unsat, Verdict::Sat]),
            Verdict::Unsat
        );
    }

    #[test]
    fn classification_matrix() {
        let outcome = |v| SolverOutcome {
            verdict: v,
            answers: Vec::new(),
            stdout_excerpt: String::new(),
            stderr_excerpt: String::new(),
            exit_code: Some(0),
            wall: Duration::ZERO,
        };
        let qf = vec!["QF_*".to_string()];
        assert_eq!(
            classify(&outcome(Verdict::Unsat), Some("QF_LIA"), &qf),
            Some(BugClass::A)
        );
        assert_eq!(
            classify(&outcome(Verdict::Unsat), Some("LIA"), &qf),
            Some(BugClass::A)
        );
        assert_eq!(
            classify(&outcome(Verdict::Unknown), Some("QF_BV"), &qf),
            Some(BugClass::C)
        );
        assert_eq!(classify(&outcome(Verdict::Unknown), Some("LIA"), &qf), None);
        assert_eq!(classify(&outcome(Verdict::Unknown), None, &qf), None);
        assert_eq!(
            classify(&outcome(Verdict::Crash), Some("QF_LIA"), &qf),
            Some(BugClass::D)
        );
        assert_eq!(classify(&outcome(Verdict::Sat), Some("QF_LIA"), &qf), None);
        assert_eq!(
            classify(&outcome(Verdict::Timeout), Some("QF_LIA"), &qf),
            None
        );
    }

    #[test]
    fn file_mode_substitutes_the_path() {
        let profile = sh_profile("cat -- \"$1\"", 5_000);
        let out = run_solver(&profile, InstanceInput::Text("unsat\n")).unwrap();
        assert_eq!(out.verdict, Verdict::Unsat);
        assert_eq!(out.exit_code, Some(0));
    }

    #[test]
    fn pipe_mode_feeds_stdin() {
        let profile = SolverProfile {
            id: "cat".into(),
            binary: "/bin/cat".into(),
            args: Vec::new(),
            incremental: true,
            timeout: Duration::from_secs(5),
            memory_limit_mb: None,
            input_mode: InputMode::Pipe,
        };
        let out = run_solver(&profile, InstanceInput::Text("sat\nsat\nunknown\n")).unwrap();
        assert_eq!(out.verdict, Verdict::Unknown);
        assert_eq!(out.answers.len(), 3);
    }

    #[test]
    fn nonzero_exit_without_tokens_is_a_crash() {
        let profile = sh_profile("kill -SEGV $$", 5_000);
        let out = run_solver(&profile, InstanceInput::Text("")).unwrap();
        assert_eq!(out.verdict, Verdict::Crash);
    }

    #[test]
    fn clean_exit_without_tokens_is_unknown() {
        let profile = sh_profile("echo 'no idea'", 5_000);
        let out = run_solver(&profile, InstanceInput::Text("")).unwrap();
        assert_eq!(out.verdict, Verdict::Unknown);
    }

    #[test]
    fn printed_verdict_beats_nonzero_exit() {
        let profile = sh_profile("echo unsat; exit 3", 5_000);
        let out = run_solver(&profile, InstanceInput::Text("")).unwrap();
        assert_eq!(out.verdict, Verdict::Unsat);
        assert_eq!(out.exit_code, Some(3));
    }

    #[test]
    fn timeout_kills_the_whole_group() {
        let profile = sh_profile("sleep 30 & sleep 30", 300);
        let started = Instant::now();
        let out = run_solver(&profile, InstanceInput::Text("")).unwrap();
        assert_eq!(out.verdict, Verdict::Timeout);
        assert!(started.elapsed() < Duration::from_secs(10));
    }

    #[test]
    fn timeout_wins_over_printed_answers() {
        let profile = sh_profile("echo sat; sleep 30", 300);
        let out = run_solver(&profile, InstanceInput::Text("")).unwrap();
        assert_eq!(out.verdict, Verdict::Timeout);
    }

    #[test]
    fn missing_binary_is_a_spawn_error() {
        let profile = SolverProfile {
            id: "ghost".into(),
            binary: "/nonexistent/solver".into(),
            args: vec!["{file}".into()],
            incremental: false,
            timeout: Duration::from_secs(1),
            memory_limit_mb: None,
            input_mode: InputMode::File,
        };
        let err = run_solver(&profile, InstanceInput::Text("")).unwrap_err();
        assert!(matches!(err, Error::Spawn { .. }));
    }

    #[test]
    fn profile_validation_checks_the_placeholder() {
        let mut p = sh_profile("true", 1_000);
        assert!(p.validate().is_ok());
        p.args.retain(|a| !a.contains("{file}"));
        assert!(p.validate().is_err());
        p.input_mode = InputMode::Pipe;
        assert!(p.validate().is_ok());
    }
}
