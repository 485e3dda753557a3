//! Campaign configuration: a line-oriented key=value file with section
//! headers, overridable by command-line flags (flags win).
//!
//! ```text
//! [campaign]
//! seeds = corpus/*.smt2
//! out = storm-out
//! rng_seed = 42
//! workers = 4
//!
//! [solver z3]
//! binary = /usr/bin/z3
//! args = {file}
//! timeout_ms = 10000
//! logics = QF_*
//!
//! [oracle]
//! binary = tools/z3-oracle/target/release/storm-z3
//! ```
//!
//! Comments occupy whole lines and start with `#`. Unknown sections and
//! keys are errors: a typo should fail loudly, not silently fall back to a
//! default. Arguments containing spaces cannot be expressed; none of the
//! supported solvers need them.

use std::path::{Path, PathBuf};
use std::time::Duration;

use crate::error::{Error, Result};
use crate::runner::{InputMode, SolverProfile};

/// A target solver: how to run it plus which logics it supports. An empty
/// support list means every logic.
#[derive(Clone, Debug)]
pub struct TargetSolver {
    pub profile: SolverProfile,
    pub logics: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct OracleConfig {
    /// None means discovery: the STORM_ORACLE environment variable, then
    /// `storm-z3` on PATH. The environment variable wins even when a path
    /// is configured.
    pub binary: Option<PathBuf>,
    pub query_timeout: Duration,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            binary: None,
            query_timeout: Duration::from_millis(5_000),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CampaignConfig {
    /// seed files or globs, expanded at campaign start
    pub seeds: Vec<String>,
    pub solvers: Vec<TargetSolver>,
    pub oracle: OracleConfig,
    pub out_dir: PathBuf,
    pub rng_seed: u64,
    pub d_max: u32,
    pub a_max: u32,
    /// construction-pool budget range; the per-seed value interpolates on
    /// initial-pool size
    pub nc_range: (u32, u32),
    /// mutant budget range, scaled the same way
    pub nm_range: (u32, u32),
    /// fixed per-seed mutant budget; overrides the nm scaling when set
    pub iterations: Option<u64>,
    pub incremental: bool,
    pub workers: usize,
    /// seeds whose logic matches no allow entry are skipped (empty = allow
    /// everything); deny entries are dropped even when allowed
    pub logic_allow: Vec<String>,
    pub logic_deny: Vec<String>,
    /// logics on which `unknown` counts as an incompleteness bug
    pub decidable: Vec<String>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            seeds: Vec::new(),
            solvers: Vec::new(),
            oracle: OracleConfig::default(),
            out_dir: PathBuf::from("storm-out"),
            rng_seed: 42,
            d_max: 64,
            a_max: 64,
            nc_range: (200, 1500),
            nm_range: (300, 1000),
            iterations: None,
            incremental: false,
            workers: 1,
            logic_allow: Vec::new(),
            logic_deny: Vec::new(),
            decidable: vec!["QF_*".to_string()],
        }
    }
}

impl CampaignConfig {
    pub fn load(path: &Path) -> Result<CampaignConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        CampaignConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<CampaignConfig> {
        let mut cfg = CampaignConfig::default();
        let mut section = Section::None;
        let mut seen: Vec<(String, String)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let lineno = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(header) = line.strip_prefix('[') {
                let header = header
                    .strip_suffix(']')
                    .ok_or_else(|| bad(lineno, "unterminated section header"))?
                    .trim();
                section = parse_header(header, lineno, &mut cfg)?;
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(lineno, "expected key = value"))?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() {
                return Err(bad(lineno, "empty key"));
            }
            let scope = section.scope_name();
            if seen.iter().any(|(s, k)| s == &scope && k == key) {
                return Err(bad(lineno, format!("duplicate key {key} in {scope}")));
            }
            seen.push((scope, key.to_string()));
            apply_key(&mut cfg, &section, key, value, lineno)?;
        }
        Ok(cfg)
    }

    /// Invariant checks shared by file loading and flag overriding; a
    /// violation is a usage error (exit code 2 in the CLI).
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no seed files or globs given".into()));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("no solver profiles configured".into()));
        }
        if self.d_max == 0 || self.a_max == 0 {
            return Err(Error::Config("d_max and a_max must be positive".into()));
        }
        for (name, (lo, hi)) in [("nc_range", self.nc_range), ("nm_range", self.nm_range)] {
            if lo == 0 || lo > hi {
                return Err(Error::Config(format!(
                    "{name} {lo}..{hi} is empty or starts at zero"
                )));
            }
        }
        if self.iterations == Some(0) {
            return Err(Error::Config("iterations must be positive".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        if self.oracle.query_timeout.is_zero() {
            return Err(Error::Config("oracle timeout must be positive".into()));
        }
        let mut ids: Vec<&str> = self.solvers.iter().map(|s| s.profile.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate solver id".into()));
        }
        for solver in &self.solvers {
            solver.profile.validate()?;
        }
        Ok(())
    }

    /// Apply command-line flags on top of the file values.
    pub fn apply_overrides(&mut self, ov: &Overrides) -> Result<()> {
        if let Some(glob) = &ov.seeds {
            self.seeds = vec![glob.clone()];
        }
        if let Some(id) = &ov.solver {
            let before = self.solvers.len();
            self.solvers.retain(|s| &s.profile.id == id);
            if self.solvers.is_empty() {
                return Err(Error::Config(format!(
                    "--solver {id}: no such profile among the {before} configured"
                )));
            }
        }
        if let Some(seed) = ov.rng_seed {
            self.rng_seed = seed;
        }
        if ov.incremental {
            self.incremental = true;
        }
        if let Some(n) = ov.workers {
            self.workers = n;
        }
        if let Some(dir) = &ov.out {
            self.out_dir = dir.clone();
        }
        Ok(())
    }
}

/// Command-line values that shadow the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seeds: Option<String>,
    pub solver: Option<String>,
    pub rng_seed: Option<u64>,
    pub incremental: bool,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Section {
    None,
    Campaign,
    Oracle,
    /// index into cfg.solvers
    Solver(usize),
}

impl Section {
    fn scope_name(&self) -> String {
        match self {
            Section::None => "(top level)".to_string(),
            Section::Campaign => "[campaign]".to_string(),
            Section::Oracle => "[oracle]".to_string(),
            Section::Solver(i) => format!("[solver #{i}]"),
        }
    }
}

fn bad(lineno: usize, message: impl std::fmt::Display) -> Error {
    Error::Config(format!("config line {lineno}: {message}"))
}

fn parse_header(header: &str, lineno: usize, cfg: &mut CampaignConfig) -> Result<Section> {
    if header == "campaign" {
        return Ok(Section::Campaign);
    }
    if header == "oracle" {
        return Ok(Section::Oracle);
    }
    if let Some(id) = header.strip_prefix("solver") {
        let id = id.trim();
        if id.is_empty() {
            return Err(bad(lineno, "solver section needs an id: [solver <id>]"));
        }
        if cfg.solvers.iter().any(|s| s.profile.id == id) {
            return Err(bad(lineno, format!("duplicate solver section {id}")));
        }
        cfg.solvers.push(TargetSolver {
            profile: SolverProfile {
                id: id.to_string(),
                binary: PathBuf::new(),
                args: vec!["{file}".to_string()],
                incremental: false,
                timeout: Duration::from_millis(10_000),
                memory_limit_mb: None,
                input_mode: InputMode::File,
            },
            logics: Vec::new(),
        });
        return Ok(Section::Solver(cfg.solvers.len() - 1));
    }
    Err(bad(lineno, format!("unknown section [{header}]")))
}

fn apply_key(
    cfg: &mut CampaignConfig,
    section: &Section,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<()> {
    match section {
        Section::None => Err(bad(
            lineno,
            format!("key {key} appears before any section header"),
        )),
        Section::Campaign => apply_campaign_key(cfg, key, value, lineno),
        Section::Oracle => match key {
            "binary" => {
                cfg.oracle.binary = Some(PathBuf::from(value));
                Ok(())
            }
            "timeout_ms" => {
                cfg.oracle.query_timeout = Duration::from_millis(parse_num(value, lineno)?);
                Ok(())
            }
            _ => Err(bad(lineno, format!("unknown oracle key {key}"))),
        },
        Section::Solver(i) => {
            let solver = &mut cfg.solvers[*i];
            match key {
                "binary" => solver.profile.binary = PathBuf::from(value),
                "args" => {
                    solver.profile.args =
                        value.split_whitespace().map(str::to_string).collect();
                }
                "input" => {
                    solver.profile.input_mode = match value {
                        "file" => InputMode::File,
                        "pipe" => {
                            // the default args template only applies to file mode
                            if solver.profile.args == ["{file}"] {
                                solver.profile.args = Vec::new();
                            }
                            InputMode::Pipe
                        }
                        other => {
                            return Err(bad(
                                lineno,
                                format!("input must be file or pipe, not {other}"),
                            ))
                        }
                    };
                }
                "timeout_ms" => {
                    solver.profile.timeout = Duration::from_millis(parse_num(value, lineno)?);
                }
                "memory_mb" => solver.profile.memory_limit_mb = Some(parse_num(value, lineno)?),
                "incremental" => solver.profile.incremental = parse_bool(value, lineno)?,
                "logics" => solver.logics = parse_list(value),
                _ => return Err(bad(lineno, format!("unknown solver key {key}"))),
            }
            Ok(())
        }
    }
}

fn apply_campaign_key(
    cfg: &mut CampaignConfig,
    key: &str,
    value: &str,
    lineno: usize,
) -> Result<()> {
    match key {
        "seeds" => cfg.seeds = parse_list(value),
        "out" => cfg.out_dir = PathBuf::from(value),
        "rng_seed" => cfg.rng_seed = parse_num(value, lineno)?,
        "d_max" => cfg.d_max = parse_num32(value, lineno)?,
        "a_max" => cfg.a_max = parse_num32(value, lineno)?,
        "nc_range" => cfg.nc_range = parse_range(value, lineno)?,
        "nm_range" => cfg.nm_range = parse_range(value, lineno)?,
        "iterations" => cfg.iterations = Some(parse_num(value, lineno)?),
        "incremental" => cfg.incremental = parse_bool(value, lineno)?,
        "workers" => cfg.workers = parse_num(value, lineno)? as usize,
        "logic_allow" => cfg.logic_allow = parse_list(value),
        "logic_deny" => cfg.logic_deny = parse_list(value),
        "decidable" => cfg.decidable = parse_list(value),
        _ => return Err(bad(lineno, format!("unknown campaign key {key}"))),
    }
    Ok(())
}

fn parse_num(value: &str, lineno: usize) -> Result<u64> {
    value
        .parse::<u64>()
        .map_err(|_| bad(lineno, format!("{value} is not a non-negative integer")))
}

fn parse_num32(value: &str, lineno: usize) -> Result<u32> {
    parse_num(value, lineno)?
        .try_into()
        .map_err(|_| bad(lineno, format!("{value} does not fit in 32 bits")))
}

fn parse_bool(value: &str, lineno: usize) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(lineno, format!("{other} is not true or false"))),
    }
}

fn parse_range(value: &str, lineno: usize) -> Result<(u32, u32)> {
    let (lo, hi) = value
        .split_once("..")
        .ok_or_else(|| bad(lineno, format!("{value} is not of the form lo..hi")))?;
    Ok((
        parse_num32(lo.trim(), lineno)?,
        parse_num32(hi.trim(), lineno)?,
    ))
}

/// Comma-separated list; surrounding whitespace per entry is dropped.
fn parse_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "\
# campaign under test
[campaign]
seeds = corpus/*.smt2, extra/one.smt2
out = /tmp/run7
rng_seed = 99
d_max = 32
a_max = 16
nc_range = 100..200
nm_range = 50..80
iterations = 500
incremental = true
workers = 3
logic_allow = QF_*, LIA
logic_deny = QF_S
decidable = QF_*

[solver z3]
binary = /usr/bin/z3
args = -smt2 {file}
timeout_ms = 2500
memory_mb = 512
logics = QF_UF, QF_LIA

[solver cvc5-pipe]
binary = /opt/cvc5
input = pipe
incremental = true

[oracle]
binary = /opt/storm-z3
timeout_ms = 1234
";

    #[test]
    fn full_config_round_trips_every_key() {
        let cfg = CampaignConfig::parse(FULL).unwrap();
        assert_eq!(cfg.seeds, ["corpus/*.smt2", "extra/one.smt2"]);
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/run7"));
        assert_eq!(cfg.rng_seed, 99);
        assert_eq!((cfg.d_max, cfg.a_max), (32, 16));
        assert_eq!(cfg.nc_range, (100, 200));
        assert_eq!(cfg.nm_range, (50, 80));
        assert_eq!(cfg.iterations, Some(500));
        assert!(cfg.incremental);
        assert_eq!(cfg.workers, 3);
        assert_eq!(cfg.logic_allow, ["QF_*", "LIA"]);
        assert_eq!(cfg.logic_deny, ["QF_S"]);

        assert_eq!(cfg.solvers.len(), 2);
        let z3 = &cfg.solvers[0];
        assert_eq!(z3.profile.id, "z3");
        assert_eq!(z3.profile.args, ["-smt2", "{file}"]);
        assert_eq!(z3.profile.timeout, Duration::from_millis(2500));
        assert_eq!(z3.profile.memory_limit_mb, Some(512));
        assert_eq!(z3.logics, ["QF_UF", "QF_LIA"]);
        let cvc = &cfg.solvers[1];
        assert_eq!(cvc.profile.input_mode, InputMode::Pipe);
        assert!(cvc.profile.args.is_empty());
        assert!(cvc.profile.incremental);
        assert!(cvc.logics.is_empty());

        assert_eq!(cfg.oracle.binary.as_deref(), Some(Path::new("/opt/storm-z3")));
        assert_eq!(cfg.oracle.query_timeout, Duration::from_millis(1234));
        cfg.validate().unwrap();
    }

    #[test]
    fn defaults_match_the_documented_bounds() {
        let cfg = CampaignConfig::parse("[campaign]\nseeds = x.smt2\n").unwrap();
        assert_eq!((cfg.d_max, cfg.a_max), (64, 64));
        assert_eq!(cfg.nc_range, (200, 1500));
        assert_eq!(cfg.nm_range, (300, 1000));
        assert_eq!(cfg.iterations, None);
        assert_eq!(cfg.workers, 1);
        assert!(!cfg.incremental);
        assert_eq!(cfg.decidable, ["QF_*"]);
        assert_eq!(cfg.rng_seed, 42);
        assert!(cfg.oracle.binary.is_none());
    }

    #[test]
    fn typos_fail_loudly_with_line_numbers() {
        for (text, needle) in [
            ("[campain]\n", "unknown section"),
            ("[campaign]\nworker = 2\n", "unknown campaign key"),
            ("[solver s]\nlogic = QF_UF\n", "unknown solver key"),
            ("[oracle]\npath = /x\n", "unknown oracle key"),
            ("seeds = x\n", "before any section"),
            ("[campaign]\nseeds\n", "key = value"),
            ("[campaign\n", "unterminated"),
            ("[solver]\n", "needs an id"),
            ("[solver a]\n[solver a]\n", "duplicate solver section"),
            ("[campaign]\nworkers = 2\nworkers = 3\n", "duplicate key"),
            ("[campaign]\nworkers = -2\n", "not a non-negative integer"),
            ("[campaign]\nincremental = yes\n", "not true or false"),
            ("[campaign]\nnc_range = 100\n", "lo..hi"),
            ("[solver s]\ninput = socket\n", "file or pipe"),
        ] {
            let err = CampaignConfig::parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?} gave {err}");
            assert!(err.contains("line"), "{err} lacks a line number");
        }
    }

    #[test]
    fn validation_rejects_bad_invariants() {
        let base = "[campaign]\nseeds = x.smt2\n[solver s]\nbinary = /bin/true\n";
        CampaignConfig::parse(base).unwrap().validate().unwrap();

        for (extra, needle) in [
            ("[campaign]\n", "no seed"),
            ("[campaign]\nseeds = x.smt2\n", "no solver"),
            (
                "[campaign]\nseeds = x\nd_max = 0\n[solver s]\nbinary = /bin/true\n",
                "positive",
            ),
            (
                "[campaign]\nseeds = x\nnc_range = 100..50\n[solver s]\nbinary = /bin/true\n",
                "empty",
            ),
            (
                "[campaign]\nseeds = x\nworkers = 0\n[solver s]\nbinary = /bin/true\n",
                "worker count",
            ),
            (
                "[campaign]\nseeds = x\niterations = 0\n[solver s]\nbinary = /bin/true\n",
                "iterations",
            ),
            (
                "[campaign]\nseeds = x\n[solver s]\nbinary = /bin/true\ntimeout_ms = 0\n",
                "timeout",
            ),
            (
                "[campaign]\nseeds = x\n[solver s]\nbinary = /b\nargs = -v\n",
                "{file}",
            ),
            (
                "[campaign]\nseeds = x\n[solver s]\nbinary = /b\ninput = pipe\nargs = {file}\n",
                "pipe mode",
            ),
        ] {
            let err = CampaignConfig::parse(extra)
                .unwrap()
                .validate()
                .unwrap_err()
                .to_string();
            assert!(err.contains(needle), "{extra:?} gave {err}");
        }
    }

    #[test]
    fn flags_win_over_file_values() {
        let mut cfg = CampaignConfig::parse(FULL).unwrap();
        let ov = Overrides {
            seeds: Some("other/*.smt2".into()),
            solver: Some("cvc5-pipe".into()),
            rng_seed: Some(7),
            incremental: false, // absent flag must NOT reset the file value
            workers: Some(8),
            out: Some(PathBuf::from("elsewhere")),
        };
        cfg.apply_overrides(&ov).unwrap();
        assert_eq!(cfg.seeds, ["other/*.smt2"]);
        assert_eq!(cfg.solvers.len(), 1);
        assert_eq!(cfg.solvers[0].profile.id, "cvc5-pipe");
        assert_eq!(cfg.rng_seed, 7);
        assert!(cfg.incremental, "file value survives an unset flag");
        assert_eq!(cfg.workers, 8);
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));

        let missing = Overrides {
            solver: Some("ghost".into()),
            ..Overrides::default()
        };
        let err = cfg.apply_overrides(&missing).unwrap_err().to_string();
        assert!(err.contains("ghost"));
    }
}
