//! Deterministic faulty solvers for exercising the harness end to end.
//!
//! A mock is installed as a tiny shell wrapper that re-enters this binary's
//! hidden `mock-serve` subcommand with a fixed behavior string, so the
//! campaign machinery talks to it exactly as it would to a real solver.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::oracle::OracleClient;
use crate::smtlib::ast::{Command, Script, Symbol, Term};
use crate::smtlib::parse_script;

/// Fire when at least `min_asserts` of the active assertions both mention
/// `symbol` and are at least `min_depth` deep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trigger {
    pub symbol: String,
    pub min_asserts: usize,
    pub min_depth: u32,
}

impl Trigger {
    fn armed(&self, active: &[&Term]) -> bool {
        let sym = Symbol::new(self.symbol.as_str());
        let hits = active
            .iter()
            .filter(|t| t.depth() >= self.min_depth && t.free_symbols().contains(&sym))
            .count();
        hits >= self.min_asserts
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MockBehavior {
    /// delegate every query to the trusted solver (path, or the usual
    /// oracle resolution when omitted)
    HonestForward(Option<PathBuf>),
    /// answer unsat at triggered check points, sat otherwise
    UnsatOnTrigger(Trigger),
    /// die with exit code 139 and no output if any check point triggers
    CrashOnTrigger(Trigger),
    /// answer unknown at every check point
    UnknownAlways,
    /// never answer at all (timeout fodder)
    SleepForever,
}

impl FromStr for MockBehavior {
    type Err = Error;

    fn from_str(s: &str) -> Result<MockBehavior> {
        let parse_trigger = |rest: &str, kind: &str| -> Result<Trigger> {
            let parts: Vec<&str> = rest.split(':').collect();
            let [symbol, count, depth] = parts.as_slice() else {
                return Err(Error::Config(format!(
                    "{kind} takes symbol:min-asserts:min-depth, got `{rest}`"
                )));
            };
            if symbol.is_empty() {
                return Err(Error::Config(format!("{kind}: empty trigger symbol")));
            }
            Ok(Trigger {
                symbol: symbol.to_string(),
                min_asserts: count
                    .parse()
                    .map_err(|_| Error::Config(format!("{kind}: bad count `{count}`")))?,
                min_depth: depth
                    .parse()
                    .map_err(|_| Error::Config(format!("{kind}: bad depth `{depth}`")))?,
            })
        };
        match s {
            "honest-forward" => return Ok(MockBehavior::HonestForward(None)),
            "unknown-always" => return Ok(MockBehavior::UnknownAlways),
            "sleep-forever" => return Ok(MockBehavior::SleepForever),
            _ => {}
        }
        if let Some(path) = s.strip_prefix("honest-forward:") {
            return Ok(MockBehavior::HonestForward(Some(PathBuf::from(path))));
        }
        if let Some(rest) = s.strip_prefix("unsat-on-trigger:") {
            return Ok(MockBehavior::UnsatOnTrigger(parse_trigger(
                rest,
                "unsat-on-trigger",
            )?));
        }
        if let Some(rest) = s.strip_prefix("crash-on-trigger:") {
            return Ok(MockBehavior::CrashOnTrigger(parse_trigger(
                rest,
                "crash-on-trigger",
            )?));
        }
        Err(Error::Config(format!("unknown mock behavior `{s}`")))
    }
}

impl fmt::Display for MockBehavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MockBehavior::HonestForward(None) => write!(f, "honest-forward"),
            MockBehavior::HonestForward(Some(p)) => {
                write!(f, "honest-forward:{}", p.display())
            }
            MockBehavior::UnsatOnTrigger(t) => {
                write!(f, "unsat-on-trigger:{}:{}:{}", t.symbol, t.min_asserts, t.min_depth)
            }
            MockBehavior::CrashOnTrigger(t) => {
                write!(f, "crash-on-trigger:{}:{}:{}", t.symbol, t.min_asserts, t.min_depth)
            }
            MockBehavior::UnknownAlways => write!(f, "unknown-always"),
            MockBehavior::SleepForever => write!(f, "sleep-forever"),
        }
    }
}

/// What a mock prints and how it exits for one instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MockReply {
    pub stdout: String,
    pub exit_code: i32,
}

fn reply(stdout: impl Into<String>) -> MockReply {
    MockReply {
        stdout: stdout.into(),
        exit_code: 0,
    }
}

/// Answer one instance text. Pure except for honest-forward (which runs
/// the trusted solver) and excluding sleep-forever (the caller loops).
pub fn serve(behavior: &MockBehavior, instance_text: &str) -> MockReply {
    match behavior {
        MockBehavior::UnknownAlways => {
            let checks = match parse_script(instance_text) {
                Ok(s) => s.check_points().len().max(1),
                Err(_) => 1,
            };
            reply("unknown\n".repeat(checks))
        }
        MockBehavior::HonestForward(path) => {
            let oracle = match OracleClient::locate(path.as_deref(), Duration::from_secs(60)) {
                Ok(o) => o,
                Err(_) => return reply("unknown\n"),
            };
            match oracle.check_ground_truth(instance_text) {
                Ok(v) => reply(format!("{v}\n")),
                Err(_) => reply("unknown\n"),
            }
        }
        MockBehavior::UnsatOnTrigger(trigger) => {
            let Ok(script) = parse_script(instance_text) else {
                return reply("unknown\n");
            };
            let mut out = String::new();
            scan_checkpoints(&script, |active| {
                out.push_str(if trigger.armed(active) { "unsat\n" } else { "sat\n" });
                true
            });
            if out.is_empty() {
                out.push_str("unknown\n");
            }
            reply(out)
        }
        MockBehavior::CrashOnTrigger(trigger) => {
            let Ok(script) = parse_script(instance_text) else {
                return reply("unknown\n");
            };
            let mut fired = false;
            let mut answers = 0usize;
            scan_checkpoints(&script, |active| {
                if trigger.armed(active) {
                    fired = true;
                    return false;
                }
                answers += 1;
                true
            });
            if fired {
                // a crash leaves no verdict behind
                MockReply {
                    stdout: String::new(),
                    exit_code: 139,
                }
            } else if answers == 0 {
                reply("unknown\n")
            } else {
                reply("sat\n".repeat(answers))
            }
        }
        MockBehavior::SleepForever => reply(""),
    }
}

/// Walk the command stream maintaining the assertion stack; call `visit`
/// with the active assertions at each check point until it returns false.
fn scan_checkpoints<'s>(script: &'s Script, mut visit: impl FnMut(&[&'s Term]) -> bool) {
    let mut frames: Vec<usize> = Vec::new();
    let mut active: Vec<&Term> = Vec::new();
    for cmd in &script.commands {
        match cmd {
            Command::Assert(t) => active.push(t),
            Command::Push(n) => {
                for _ in 0..*n {
                    frames.push(active.len());
                }
            }
            Command::Pop(n) => {
                for _ in 0..*n {
                    if let Some(mark) = frames.pop() {
                        active.truncate(mark);
                    }
                }
            }
            c if c.is_check() => {
                if !visit(&active) {
                    return;
                }
            }
            _ => {}
        }
    }
}

/// Write an executable wrapper at `out` that replays `behavior` through
/// `self_exe mock-serve`. The wrapper accepts an instance file argument or
/// the instance on stdin, like a normal solver.
pub fn install(behavior: &MockBehavior, out: &Path, self_exe: &Path) -> Result<()> {
    let spec = behavior.to_string();
    let exe = self_exe.display().to_string();
    if spec.contains('\'') || exe.contains('\'') {
        return Err(Error::Config(
            "single quotes are not allowed in mock specs or paths".into(),
        ));
    }
    let script = format!(
        "#!/bin/sh\nexec '{exe}' mock-serve --behavior '{spec}' \"$@\"\n"
    );
    std::fs::write(out, script)?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        std::fs::set_permissions(out, std::fs::Permissions::from_mode(0o755))?;
    }
    Ok(())
}

/// Body of the hidden `mock-serve` subcommand: read the instance (file
/// argument or stdin), answer, exit. Never returns for sleep-forever.
pub fn serve_main(behavior: &MockBehavior, instance: Option<&Path>) -> Result<i32> {
    if *behavior == MockBehavior::SleepForever {
        loop {
            std::thread::sleep(Duration::from_secs(3600));
        }
    }
    let text = match instance {
        Some(p) => std::fs::read_to_string(p)?,
        None => {
            use std::io::Read;
            let mut buf = String::new();
            std::io::stdin().read_to_string(&mut buf)?;
            buf
        }
    };
    let r = serve(behavior, &text);
    print!("{}", r.stdout);
    use std::io::Write;
    let _ = std::io::stdout().flush();
    Ok(r.exit_code)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn behavior(s: &str) -> MockBehavior {
        s.parse().unwrap()
    }

    #[test]
    fn behavior_specs_round_trip() {
        for s in [
            "honest-forward",
            "honest-forward:/usr/bin/z3",
            "unsat-on-trigger:storm_marker:3:1",
            "crash-on-trigger:f:1:4",
            "unknown-always",
            "sleep-forever",
        ] {
            assert_eq!(behavior(s).to_string(), s);
        }
        for bad in [
            "unsat-on-trigger:only-symbol",
            "unsat-on-trigger::3:1",
            "unsat-on-trigger:x:three:1",
            "frobnicate",
            "",
        ] {
            assert!(bad.parse::<MockBehavior>().is_err(), "{bad}");
        }
    }

    fn marker_instance(n_trigger: usize, n_other: usize) -> String {
        let mut s = String::from(
            "(set-logic QF_UF)(declare-const storm_marker Bool)(declare-const other Bool)",
        );
        for _ in 0..n_trigger {
            s.push_str("(assert storm_marker)");
        }
        for _ in 0..n_other {
            s.push_str("(assert other)");
        }
        s.push_str("(check-sat)");
        s
    }

    #[test]
    fn trigger_counts_mentioning_assertions() {
        let b = behavior("unsat-on-trigger:storm_marker:3:1");
        assert_eq!(serve(&b, &marker_instance(2, 5)).stdout, "sat\n");
        assert_eq!(serve(&b, &marker_instance(3, 0)).stdout, "unsat\n");
        assert_eq!(serve(&b, &marker_instance(4, 2)).stdout, "unsat\n");
    }

    #[test]
    fn trigger_respects_depth_floor() {
        let b = behavior("unsat-on-trigger:m:1:3");
        // depth 1: the bare constant
        let shallow = "(declare-const m Bool)(assert m)(check-sat)";
        assert_eq!(serve(&b, shallow).stdout, "sat\n");
        // depth 3: two operators over it
        let deep = "(declare-const m Bool)(assert (not (not m)))(check-sat)";
        assert_eq!(serve(&b, deep).stdout, "unsat\n");
    }

    #[test]
    fn trigger_sees_through_push_and_pop() {
        let b = behavior("unsat-on-trigger:m:2:1");
        let text = "(declare-const m Bool)\
                    (assert m)(push 1)(assert m)(check-sat)(pop 1)(check-sat)";
        assert_eq!(serve(&b, text).stdout, "unsat\nsat\n");
    }

    #[test]
    fn function_application_heads_count_as_mentions() {
        let b = behavior("unsat-on-trigger:f:1:1");
        let text = "(declare-sort S 0)(declare-fun f (S) S)(declare-const c S)\
                    (assert (= (f c) c))(check-sat)";
        assert_eq!(serve(&b, text).stdout, "unsat\n");
    }

    #[test]
    fn crash_mock_dies_without_output_only_when_triggered() {
        let b = behavior("crash-on-trigger:storm_marker:2:1");
        let hit = serve(&b, &marker_instance(2, 0));
        assert_eq!(hit.exit_code, 139);
        assert_eq!(hit.stdout, "");
        let miss = serve(&b, &marker_instance(1, 3));
        assert_eq!(miss.exit_code, 0);
        assert_eq!(miss.stdout, "sat\n");
    }

    #[test]
    fn unknown_always_answers_every_check_point() {
        let b = behavior("unknown-always");
        let text = "(declare-const p Bool)(assert p)(check-sat)(push 1)(check-sat)(pop 1)(check-sat)";
        assert_eq!(serve(&b, text).stdout, "unknown\nunknown\nunknown\n");
    }

    #[test]
    fn unparseable_input_yields_unknown() {
        for spec in [
            "unsat-on-trigger:m:1:1",
            "crash-on-trigger:m:1:1",
            "unknown-always",
        ] {
            let r = serve(&behavior(spec), "(((((this is not smtlib");
            assert_eq!(r.stdout, "unknown\n", "{spec}");
            assert_eq!(r.exit_code, 0);
        }
    }

    #[test]
    fn honest_forward_delegates_to_the_trusted_solver() {
        let path = std::env::var("STORM_ORACLE").unwrap_or_else(|_| {
            concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../tools/z3-oracle/target/release/storm-z3"
            )
            .to_string()
        });
        let b = behavior(&format!("honest-forward:{path}"));
        assert_eq!(serve(&b, "(assert true)(check-sat)").stdout, "sat\n");
        assert_eq!(serve(&b, "(assert false)(check-sat)").stdout, "unsat\n");
    }

    #[test]
    fn install_writes_an_executable_wrapper() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("mock-solver");
        let b = behavior("unsat-on-trigger:m:2:1");
        install(&b, &out, Path::new("/opt/storm-forge")).unwrap();
        let body = std::fs::read_to_string(&out).unwrap();
        assert!(body.starts_with("#!/bin/sh\n"));
        assert!(body.contains("mock-serve --behavior 'unsat-on-trigger:m:2:1'"));
        assert!(body.contains("'/opt/storm-forge'"));
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            let mode = std::fs::metadata(&out).unwrap().permissions().mode();
            assert_eq!(mode & 0o111, 0o111, "wrapper must be executable");
        }
        let err = install(&b, &out, Path::new("/bad'path")).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
