//! Campaign orchestration: seed intake, logic filtering, scheduling of
//! (seed, solver) pairs over worker threads, bug artifact writing, and
//! reporting.
//!
//! A coordinator thread owns all aggregation and every output file; worker
//! threads own their solver subprocesses and hand finished pair results
//! back over a channel. Results are buffered and emitted in schedule order,
//! so `runs.jsonl` is byte-identical for a given config and master rng seed
//! no matter how many workers ran or how they interleaved.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{CampaignConfig, TargetSolver};
use crate::error::{Error, Result};
use crate::instance::{fuzz_to_first_bug, FuzzConfig};
use crate::minimize::{minimize, MinimizationResult, SizeStats, TraceStep};
use crate::oracle::{Assignment, OracleClient};
use crate::pools::{candidate_predicate_count, scaled_budgets_in};
use crate::runner::{
    run_solver, BugReport, InstanceInput, RunRecord, SolverProfile, Verdict,
};
use crate::smtlib::ast::{Command, Script};
use crate::smtlib::{parse_file, printer};
use crate::util::{derive_seed, fnv1a};

/// Per-seed or per-solver verdict counts. The five verdict buckets always
/// sum to `instances`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub instances: u64,
    pub sat: u64,
    pub unsat: u64,
    pub unknown: u64,
    pub crash: u64,
    pub timeout: u64,
}

impl Tally {
    pub fn record(&mut self, verdict: Verdict) {
        self.instances += 1;
        match verdict {
            Verdict::Sat => self.sat += 1,
            Verdict::Unsat => self.unsat += 1,
            Verdict::Unknown => self.unknown += 1,
            Verdict::Crash => self.crash += 1,
            Verdict::Timeout => self.timeout += 1,
        }
    }

    pub fn consistent(&self) -> bool {
        self.sat + self.unsat + self.unknown + self.crash + self.timeout == self.instances
    }
}

/// Size effect of one minimization, stored next to the bug.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimizationSummary {
    pub original: SizeStats,
    pub minimized: SizeStats,
    pub fuzz_calls: u32,
    pub reproducible: bool,
}

impl MinimizationSummary {
    fn of(r: &MinimizationResult) -> MinimizationSummary {
        MinimizationSummary {
            original: r.original,
            minimized: r.minimized,
            fuzz_calls: r.fuzz_calls,
            reproducible: r.reproducible,
        }
    }
}

/// Everything `bugs/<id>/report.json` holds. Self-sufficient: re-running
/// minimization needs only this file, the instance it points at, and an
/// oracle.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BugArtifact {
    pub id: String,
    pub report: BugReport,
    pub solver: SolverProfile,
    pub fuzz: FuzzConfig,
    pub decidable: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_binary: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimization: Option<MinimizationSummary>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SkippedSeed {
    pub seed: String,
    /// None when the seed was unusable for every solver (parse failure,
    /// oracle rejection)
    pub solver: Option<String>,
    pub reason: String,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct CampaignReport {
    pub wall_time_secs: u64,
    pub seeds: usize,
    pub solvers: usize,
    pub pairs: usize,
    pub per_seed: BTreeMap<String, Tally>,
    pub per_solver: BTreeMap<String, Tally>,
    /// unique class-A bugs, minimized
    pub bugs: Vec<BugArtifact>,
    /// class C and D hits, unminimized
    pub observations: Vec<BugReport>,
    pub duplicate_bugs: u64,
    pub skipped: Vec<SkippedSeed>,
}

impl CampaignReport {
    pub fn any_bug(&self) -> bool {
        !self.bugs.is_empty() || !self.observations.is_empty()
    }

    /// The human-readable half of the report pair.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "storm-forge campaign report");
        let _ = writeln!(out, "===========================");
        let _ = writeln!(
            out,
            "wall time {}s | {} seeds x {} solvers -> {} pairs",
            self.wall_time_secs, self.seeds, self.solvers, self.pairs
        );
        let _ = writeln!(out);

        for (title, tallies) in [
            ("per-solver", &self.per_solver),
            ("per-seed", &self.per_seed),
        ] {
            let _ = writeln!(
                out,
                "{title:<24} instances      sat    unsat  unknown    crash  timeout"
            );
            for (name, t) in tallies {
                let _ = writeln!(
                    out,
                    "  {name:<22} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8}",
                    t.instances, t.sat, t.unsat, t.unknown, t.crash, t.timeout
                );
            }
            let _ = writeln!(out);
        }

        let _ = writeln!(
            out,
            "class-A bugs: {} unique ({} duplicate suppressed)",
            self.bugs.len(),
            self.duplicate_bugs
        );
        for b in &self.bugs {
            let _ = write!(
                out,
                "  [{}] {} on {} iter {}: {}",
                b.report.class, b.report.solver, b.report.seed_file, b.report.iter, b.report.verdict
            );
            match &b.minimization {
                Some(m) => {
                    let _ = writeln!(
                        out,
                        " | {}B/{}a/d{} -> {}B/{}a/d{} in {} probes{}",
                        m.original.bytes,
                        m.original.asserts,
                        m.original.depth,
                        m.minimized.bytes,
                        m.minimized.asserts,
                        m.minimized.depth,
                        m.fuzz_calls,
                        if m.reproducible { "" } else { " (NOT reproducible)" },
                    );
                }
                None => {
                    let _ = writeln!(out, " | not minimized");
                }
            }
        }
        let _ = writeln!(out, "other findings: {}", self.observations.len());
        for o in &self.observations {
            let _ = writeln!(
                out,
                "  [{}] {} on {} iter {}: {}",
                o.class, o.solver, o.seed_file, o.iter, o.verdict
            );
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(out, "skipped: {}", self.skipped.len());
            for s in &self.skipped {
                match &s.solver {
                    Some(v) => {
                        let _ = writeln!(out, "  {} x {}: {}", s.seed, v, s.reason);
                    }
                    None => {
                        let _ = writeln!(out, "  {}: {}", s.seed, s.reason);
                    }
                }
            }
        }
        out
    }
}

/// A parsed seed ready for scheduling.
#[derive(Clone, Debug)]
pub struct Seed {
    pub id: String,
    pub path: PathBuf,
    pub script: Script,
    pub logic: Option<String>,
}

/// Expand seed path patterns into a sorted, deduplicated file list.
pub fn expand_seeds(patterns: &[String]) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    for pat in patterns {
        let entries = glob::glob(pat)
            .map_err(|e| Error::Config(format!("bad seed pattern {pat}: {e}")))?;
        for entry in entries {
            let path =
                entry.map_err(|e| Error::Config(format!("unreadable match for {pat}: {e}")))?;
            if path.is_file() {
                found.push(path);
            }
        }
    }
    found.sort();
    found.dedup();
    if found.is_empty() {
        return Err(Error::Config(format!(
            "no seed files matched {}",
            patterns.join(", ")
        )));
    }
    Ok(found)
}

/// Seed ids are file stems; colliding stems get a stable hash suffix from
/// the full path so mutant directories never overlap.
fn seed_id_for(path: &Path, stem_collides: bool) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "seed".to_string());
    if stem_collides {
        let h = fnv1a(path.to_string_lossy().as_bytes()) as u32;
        format!("{stem}-{h:08x}")
    } else {
        stem
    }
}

/// Parse every matched file; unparseable seeds land in the skip list
/// instead of aborting the campaign.
pub fn load_seeds(paths: &[PathBuf], skipped: &mut Vec<SkippedSeed>) -> Vec<Seed> {
    let mut stem_count: HashMap<String, usize> = HashMap::new();
    for p in paths {
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "seed".to_string());
        *stem_count.entry(stem).or_default() += 1;
    }
    let mut seeds = Vec::new();
    for path in paths {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "seed".to_string());
        let id = seed_id_for(path, stem_count[&stem] > 1);
        match parse_file(path) {
            Ok(script) => {
                let logic = script.logic().map(|l| l.to_string());
                seeds.push(Seed {
                    id,
                    path: path.clone(),
                    script,
                    logic,
                });
            }
            Err(e) => skipped.push(SkippedSeed {
                seed: id,
                solver: None,
                reason: e.to_string(),
            }),
        }
    }
    seeds
}

/// Does `logic` match the pattern list? Entries may end in `*` for prefix
/// matching, like the decidable-fragment list.
fn logic_in(logic: &str, patterns: &[String]) -> bool {
    crate::runner::is_decidable(Some(logic), patterns)
}

/// Decide whether one solver should fuzz one seed. Seeds with a declared
/// logic are filtered on the campaign allow/deny lists and the solver's
/// supported list (empty = supports everything). Seeds without one are
/// probed: the solver runs the unmutated seed and the seed is kept only on
/// a parseable verdict token — `unknown` counts, a crash or timeout does
/// not.
pub fn admit_seed(
    seed: &Seed,
    solver: &TargetSolver,
    allow: &[String],
    deny: &[String],
) -> std::result::Result<(), String> {
    match &seed.logic {
        Some(logic) => {
            if !allow.is_empty() && !logic_in(logic, allow) {
                return Err(format!("logic {logic} not on the allow list"));
            }
            if logic_in(logic, deny) {
                return Err(format!("logic {logic} is denied"));
            }
            if !solver.logics.is_empty() && !logic_in(logic, &solver.logics) {
                return Err(format!(
                    "solver {} does not support {logic}",
                    solver.profile.id
                ));
            }
            Ok(())
        }
        None => match run_solver(&solver.profile, InstanceInput::OnDisk(&seed.path)) {
            Ok(out) if matches!(out.verdict, Verdict::Sat | Verdict::Unsat | Verdict::Unknown) => {
                Ok(())
            }
            Ok(out) => Err(format!(
                "probe on the unmutated seed answered {}",
                out.verdict
            )),
            Err(e) => Err(format!("probe failed: {e}")),
        },
    }
}

/// The subset of `seeds` one solver will fuzz, with skip entries for the
/// rest.
pub fn filter_seeds<'s>(
    seeds: &'s [Seed],
    solver: &TargetSolver,
    allow: &[String],
    deny: &[String],
) -> (Vec<&'s Seed>, Vec<SkippedSeed>) {
    let mut kept = Vec::new();
    let mut skipped = Vec::new();
    for seed in seeds {
        match admit_seed(seed, solver, allow, deny) {
            Ok(()) => kept.push(seed),
            Err(reason) => skipped.push(SkippedSeed {
                seed: seed.id.clone(),
                solver: Some(solver.profile.id.clone()),
                reason,
            }),
        }
    }
    (kept, skipped)
}

/// Fingerprint of a script's logical content: logic, declarations, stack
/// shape, and asserted terms. Instance metadata (set-info provenance,
/// set-option echoes) is ignored so that two bugs differing only in their
/// origin stamp count as one.
pub fn structural_hash(s: &Script) -> u64 {
    let mut text = String::new();
    for cmd in &s.commands {
        if let Command::Passthrough(sx) = cmd {
            if matches!(sx.head(), Some("set-info" | "set-option" | "echo")) {
                continue;
            }
        }
        printer::print_command(&mut text, cmd);
        text.push('\n');
    }
    fnv1a(text.as_bytes())
}

/// What one worker hands back for one (seed, solver) pair.
struct PairResult {
    pair: usize,
    records: Vec<RunRecord>,
    bug: Option<WorkerBug>,
    observations: Vec<BugReport>,
    skip_reason: Option<String>,
}

struct WorkerBug {
    report: BugReport,
    instance_file: String,
    instance_text: String,
    script: Script,
    minimization: Option<MinimizationResult>,
}

/// One seed's precomputed campaign inputs.
struct SeedPlan {
    fuzz: FuzzConfig,
    assignment: Assignment,
}

fn plan_for(seed: &Seed, cfg: &CampaignConfig, client: &OracleClient) -> Result<SeedPlan> {
    let hint = candidate_predicate_count(&seed.script, cfg.d_max);
    let (nc, nm) = scaled_budgets_in(
        hint,
        (cfg.nc_range.0 as usize, cfg.nc_range.1 as usize),
        (cfg.nm_range.0 as usize, cfg.nm_range.1 as usize),
    );
    let nm = cfg.iterations.map(|n| n as usize).unwrap_or(nm);
    let rng_seed = derive_seed(cfg.rng_seed, &seed.id);
    let fuzz = FuzzConfig {
        nc,
        nm,
        d_max: cfg.d_max,
        a_max: cfg.a_max,
        incremental: cfg.incremental,
        rng_seed,
    };
    let assignment = client.generate_assignment(&seed.script, rng_seed)?;
    Ok(SeedPlan { fuzz, assignment })
}

fn run_pair(
    pair: usize,
    seed: &Seed,
    plan: &SeedPlan,
    solver: &TargetSolver,
    cfg: &CampaignConfig,
    client: &OracleClient,
) -> PairResult {
    let mut result = PairResult {
        pair,
        records: Vec::new(),
        bug: None,
        observations: Vec::new(),
        skip_reason: None,
    };
    let out_dir = cfg.out_dir.join(&seed.id);
    let mut eval = client.evaluator(&seed.script, plan.assignment.clone());
    let outcome = match fuzz_to_first_bug(
        &seed.script,
        &seed.id,
        &plan.fuzz,
        &mut eval,
        &solver.profile,
        &cfg.decidable,
        Some(&out_dir),
    ) {
        Ok(o) => o,
        Err(e) => {
            result.skip_reason = Some(e.to_string());
            return result;
        }
    };
    result.records = outcome.records;
    result.observations = outcome.observations;

    if let Some(bug) = outcome.bugs.into_iter().next() {
        let script = bug.instance.to_script();
        // minimization failures downgrade to an unminimized bug; the find
        // itself is already made
        let minimization =
            minimize(&script, &plan.fuzz, &mut eval, &solver.profile, false).ok();
        result.bug = Some(WorkerBug {
            report: bug.report,
            instance_file: bug.instance.file_name(),
            instance_text: bug.instance.to_text(),
            script,
            minimization,
        });
    }
    result
}

/// Run the full campaign: filter, schedule, fuzz, minimize, dedup, and
/// write `runs.jsonl`, `report.json`, `report.txt`, and the `bugs/` tree
/// under the configured output directory.
pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignReport> {
    cfg.validate()?;
    let started = Instant::now();
    let client = OracleClient::locate(
        cfg.oracle.binary.as_deref(),
        cfg.oracle.query_timeout,
    )?;

    let mut report = CampaignReport {
        solvers: cfg.solvers.len(),
        ..CampaignReport::default()
    };

    let paths = expand_seeds(&cfg.seeds)?;
    let seeds = load_seeds(&paths, &mut report.skipped);
    report.seeds = seeds.len();

    // the assignment and the budgets for a seed are shared by every solver,
    // so they are settled once, up front
    let mut plans: Vec<Option<SeedPlan>> = Vec::with_capacity(seeds.len());
    for seed in &seeds {
        match plan_for(seed, cfg, &client) {
            Ok(plan) => plans.push(Some(plan)),
            Err(e) if e.is_seed_skip() => {
                report.skipped.push(SkippedSeed {
                    seed: seed.id.clone(),
                    solver: None,
                    reason: e.to_string(),
                });
                plans.push(None);
            }
            Err(e) => return Err(e),
        }
    }

    // schedule admitted (seed, solver) pairs, seed-major
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (si, seed) in seeds.iter().enumerate() {
        if plans[si].is_none() {
            continue;
        }
        for (vi, solver) in cfg.solvers.iter().enumerate() {
            match admit_seed(seed, solver, &cfg.logic_allow, &cfg.logic_deny) {
                Ok(()) => pairs.push((si, vi)),
                Err(reason) => report.skipped.push(SkippedSeed {
                    seed: seed.id.clone(),
                    solver: Some(solver.profile.id.clone()),
                    reason,
                }),
            }
        }
    }
    report.pairs = pairs.len();

    std::fs::create_dir_all(&cfg.out_dir)?;

    // workers pull pair indices from a shared counter and send results
    // back; the coordinator re-orders by pair index afterwards
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<PairResult>();
    let worker_count = cfg.workers.min(pairs.len().max(1));
    let mut results: Vec<Option<PairResult>> = Vec::new();
    results.resize_with(pairs.len(), || None);

    std::thread::scope(|scope| {
        for _ in 0..worker_count {
            let tx = tx.clone();
            let next = &next;
            let pairs = &pairs;
            let seeds = &seeds;
            let plans = &plans;
            let client = client.clone();
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(si, vi)) = pairs.get(i) else {
                    break;
                };
                let plan = plans[si].as_ref().expect("scheduled pairs have plans");
                let out = run_pair(i, &seeds[si], plan, &cfg.solvers[vi], cfg, &client);
                if tx.send(out).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for result in rx {
            let slot = result.pair;
            results[slot] = Some(result);
        }
    });

    // aggregation and artifact writing, in schedule order
    let mut runs_file = std::io::BufWriter::new(std::fs::File::create(
        cfg.out_dir.join("runs.jsonl"),
    )?);
    let mut seen_hashes: HashMap<String, HashSet<u64>> = HashMap::new();
    for (i, slot) in results.into_iter().enumerate() {
        let result = slot.expect("every scheduled pair reports");
        let (si, vi) = pairs[i];
        let seed = &seeds[si];
        let solver = &cfg.solvers[vi];

        if let Some(reason) = result.skip_reason {
            report.skipped.push(SkippedSeed {
                seed: seed.id.clone(),
                solver: Some(solver.profile.id.clone()),
                reason,
            });
            continue;
        }
        for record in &result.records {
            serde_json::to_writer(&mut runs_file, record)
                .map_err(|e| Error::Config(format!("cannot serialize run record: {e}")))?;
            runs_file.write_all(b"\n")?;
            report
                .per_seed
                .entry(seed.id.clone())
                .or_default()
                .record(record.verdict);
            report
                .per_solver
                .entry(solver.profile.id.clone())
                .or_default()
                .record(record.verdict);
        }
        report.observations.extend(result.observations);

        let Some(bug) = result.bug else { continue };
        // dedup on the minimized shape when there is one; two raw mutants
        // often shrink to the same trigger
        let hash = structural_hash(
            bug.minimization.as_ref().map(|m| &m.script).unwrap_or(&bug.script),
        );
        let seen = seen_hashes.entry(solver.profile.id.clone()).or_default();
        if !seen.insert(hash) {
            report.duplicate_bugs += 1;
            continue;
        }
        let plan = plans[si].as_ref().expect("scheduled pairs have plans");
        let artifact = write_bug_artifact(cfg, seed, solver, &plan.fuzz, bug, &client)?;
        report.bugs.push(artifact);
    }
    runs_file.flush()?;

    report.wall_time_secs = started.elapsed().as_secs();
    std::fs::write(
        cfg.out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Config(format!("cannot serialize report: {e}")))?,
    )?;
    std::fs::write(cfg.out_dir.join("report.txt"), report.render_text())?;
    Ok(report)
}

fn write_bug_artifact(
    cfg: &CampaignConfig,
    seed: &Seed,
    solver: &TargetSolver,
    fuzz: &FuzzConfig,
    bug: WorkerBug,
    client: &OracleClient,
) -> Result<BugArtifact> {
    let id = format!("{}__{}__iter{}", solver.profile.id, seed.id, bug.report.iter);
    let dir = cfg.out_dir.join("bugs").join(&id);
    std::fs::create_dir_all(&dir)?;

    // mirror the triggering instance next to the report
    std::fs::write(dir.join(&bug.instance_file), &bug.instance_text)?;

    let mut report = bug.report;
    let mut summary = None;
    if let Some(m) = &bug.minimization {
        let min_path = dir.join("min.smt2");
        std::fs::write(&min_path, m.script.to_text())?;
        std::fs::write(
            dir.join("trace.json"),
            serde_json::to_string_pretty(&m.trace)
                .map_err(|e| Error::Config(format!("cannot serialize trace: {e}")))?,
        )?;
        report.minimized_path = Some(min_path.display().to_string());
        summary = Some(MinimizationSummary::of(m));
    }

    let artifact = BugArtifact {
        id,
        report,
        solver: solver.profile.clone(),
        fuzz: fuzz.clone(),
        decidable: cfg.decidable.clone(),
        oracle_binary: Some(client.binary().to_path_buf()),
        minimization: summary,
    };
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&artifact)
            .map_err(|e| Error::Config(format!("cannot serialize bug artifact: {e}")))?,
    )?;
    Ok(artifact)
}

/// Re-run minimization from a `bugs/<id>/report.json` artifact: parse the
/// recorded instance, rebuild an assignment for it through the oracle, and
/// rewrite `min.smt2`, `trace.json`, and the artifact itself.
pub fn minimize_bug_artifact(artifact_path: &Path) -> Result<(BugArtifact, Vec<TraceStep>)> {
    let text = std::fs::read_to_string(artifact_path)?;
    let mut artifact: BugArtifact = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: not a bug artifact: {e}", artifact_path.display())))?;
    let dir = artifact_path
        .parent()
        .ok_or_else(|| Error::Config("artifact path has no parent directory".into()))?;

    let instance_path = Path::new(&artifact.report.instance_path);
    let script = if instance_path.is_file() {
        parse_file(instance_path)?
    } else {
        // fall back to the mirrored copy next to the artifact
        let name = instance_path
            .file_name()
            .ok_or_else(|| Error::Config("instance path has no file name".into()))?;
        parse_file(&dir.join(name))?
    };

    let client = OracleClient::locate(
        artifact.oracle_binary.as_deref().filter(|p| p.is_file()),
        std::time::Duration::from_millis(5_000),
    )?;
    // a fresh assignment for the bug instance; any model of it makes the
    // shrunken instances satisfiable by construction
    let assignment = client.generate_assignment(&script, artifact.fuzz.rng_seed)?;
    let mut eval = client.evaluator(&script, assignment);
    let result = minimize(&script, &artifact.fuzz, &mut eval, &artifact.solver, false)?;

    let min_path = dir.join("min.smt2");
    std::fs::write(&min_path, result.script.to_text())?;
    std::fs::write(
        dir.join("trace.json"),
        serde_json::to_string_pretty(&result.trace)
            .map_err(|e| Error::Config(format!("cannot serialize trace: {e}")))?,
    )?;
    artifact.report.minimized_path = Some(min_path.display().to_string());
    artifact.minimization = Some(MinimizationSummary::of(&result));
    std::fs::write(
        artifact_path,
        serde_json::to_string_pretty(&artifact)
            .map_err(|e| Error::Config(format!("cannot serialize bug artifact: {e}")))?,
    )?;
    Ok((artifact, result.trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::OracleConfig;
    use crate::runner::InputMode;
    use crate::smtlib::parse_script;
    use std::time::Duration;

    fn oracle_path() -> PathBuf {
        match std::env::var("STORM_ORACLE") {
            Ok(p) => PathBuf::from(p),
            Err(_) => PathBuf::from(concat!(
                env!("CARGO_MANIFEST_DIR"),
                "/../../tools/z3-oracle/target/release/storm-z3"
            )),
        }
    }

    fn sh_profile(id: &str, body: &str) -> SolverProfile {
        SolverProfile {
            id: id.to_string(),
            binary: PathBuf::from("/bin/sh"),
            args: ["-c", body, "sh", "{file}"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            incremental: false,
            timeout: Duration::from_secs(5),
            memory_limit_mb: None,
            input_mode: InputMode::File,
        }
    }

    fn echo_solver(id: &str, answer: &str) -> TargetSolver {
        TargetSolver {
            profile: sh_profile(id, &format!("echo {answer}")),
            logics: Vec::new(),
        }
    }

    /// Plays a solver with a soundness hole: any instance with `k` or more
    /// assert lines mentioning the marker comes back unsat.
    fn trigger_solver(id: &str, k: usize) -> TargetSolver {
        let body = format!(
            "n=$(grep -c '^(assert.*storm_marker' \"$1\" || true); \
             if [ \"$n\" -ge {k} ]; then echo unsat; else echo sat; fi"
        );
        TargetSolver {
            profile: sh_profile(id, &body),
            logics: Vec::new(),
        }
    }

    fn campaign_cfg(seeds: Vec<String>, solvers: Vec<TargetSolver>, out: &Path) -> CampaignConfig {
        CampaignConfig {
            seeds,
            solvers,
            oracle: OracleConfig {
                binary: Some(oracle_path()),
                query_timeout: Duration::from_millis(5_000),
            },
            out_dir: out.to_path_buf(),
            rng_seed: 7,
            d_max: 16,
            a_max: 16,
            nc_range: (30, 30),
            nm_range: (40, 40),
            iterations: None,
            incremental: false,
            workers: 2,
            logic_allow: Vec::new(),
            logic_deny: Vec::new(),
            decidable: vec!["QF_*".to_string()],
        }
    }

    fn seed_named(logic: Option<&str>, text: &str) -> Seed {
        let script = parse_script(text).unwrap();
        Seed {
            id: "s".into(),
            path: PathBuf::from("s.smt2"),
            script,
            logic: logic.map(|l| l.to_string()),
        }
    }

    #[test]
    fn tally_buckets_sum_to_instances() {
        let mut t = Tally::default();
        assert!(t.consistent());
        for v in [
            Verdict::Sat,
            Verdict::Sat,
            Verdict::Unsat,
            Verdict::Unknown,
            Verdict::Crash,
            Verdict::Timeout,
        ] {
            t.record(v);
        }
        assert_eq!(t.instances, 6);
        assert_eq!(t.sat, 2);
        assert_eq!(t.unsat, 1);
        assert!(t.consistent());
    }

    #[test]
    fn seed_expansion_sorts_dedups_and_requires_a_match() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::write(root.join("b.smt2"), "(check-sat)").unwrap();
        std::fs::write(root.join("a.smt2"), "(check-sat)").unwrap();
        std::fs::create_dir(root.join("sub")).unwrap();
        std::fs::write(root.join("sub/c.smt2"), "(check-sat)").unwrap();

        let glob_all = format!("{}/*.smt2", root.display());
        let one = format!("{}/a.smt2", root.display());
        let got = expand_seeds(&[glob_all, one]).unwrap();
        assert_eq!(got.len(), 2, "sub/ is not matched and a.smt2 is deduped");
        assert!(got[0].ends_with("a.smt2"));
        assert!(got[1].ends_with("b.smt2"));

        let missing = format!("{}/nope/*.smt2", root.display());
        let err = expand_seeds(&[missing]).unwrap_err();
        assert!(err.to_string().contains("no seed files matched"));
    }

    #[test]
    fn colliding_seed_stems_get_distinct_ids() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        for sub in ["one", "two"] {
            std::fs::create_dir(root.join(sub)).unwrap();
            std::fs::write(root.join(sub).join("same.smt2"), "(assert true)(check-sat)").unwrap();
        }
        let paths = expand_seeds(&[format!("{}/*/same.smt2", root.display())]).unwrap();
        let mut skipped = Vec::new();
        let seeds = load_seeds(&paths, &mut skipped);
        assert!(skipped.is_empty());
        assert_eq!(seeds.len(), 2);
        assert_ne!(seeds[0].id, seeds[1].id);
        assert!(seeds[0].id.starts_with("same-"));
        assert!(seeds[1].id.starts_with("same-"));
    }

    #[test]
    fn unparseable_seeds_are_skipped_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::write(root.join("good.smt2"), "(assert true)(check-sat)").unwrap();
        std::fs::write(root.join("bad.smt2"), "(assert (unclosed").unwrap();
        let paths = expand_seeds(&[format!("{}/*.smt2", root.display())]).unwrap();
        let mut skipped = Vec::new();
        let seeds = load_seeds(&paths, &mut skipped);
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].id, "good");
        assert_eq!(skipped.len(), 1);
        assert_eq!(skipped[0].seed, "bad");
        assert!(skipped[0].solver.is_none());
    }

    #[test]
    fn logic_gate_respects_allow_deny_and_solver_lists() {
        let seed = seed_named(
            Some("QF_BV"),
            "(set-logic QF_BV)(declare-const x (_ BitVec 8))(assert (= x x))(check-sat)",
        );
        let anything = echo_solver("any", "sat");
        assert!(admit_seed(&seed, &anything, &[], &[]).is_ok());

        let mut lia_only = echo_solver("lia", "sat");
        lia_only.logics = vec!["QF_LIA".into()];
        let err = admit_seed(&seed, &lia_only, &[], &[]).unwrap_err();
        assert!(err.contains("does not support"), "{err}");

        let err = admit_seed(&seed, &anything, &["QF_LIA".into()], &[]).unwrap_err();
        assert!(err.contains("allow list"), "{err}");

        let err = admit_seed(&seed, &anything, &[], &["QF_B*".into()]).unwrap_err();
        assert!(err.contains("denied"), "{err}");

        let mut bv_star = echo_solver("bv", "sat");
        bv_star.logics = vec!["QF_B*".into()];
        assert!(admit_seed(&seed, &bv_star, &[], &[]).is_ok());
    }

    #[test]
    fn logicless_seeds_are_probed_on_the_solver() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nologic.smt2");
        std::fs::write(&path, "(declare-const p Bool)(assert p)(check-sat)\n").unwrap();
        let seed = Seed {
            id: "nologic".into(),
            path,
            script: parse_script("(declare-const p Bool)(assert p)(check-sat)").unwrap(),
            logic: None,
        };

        // an inconclusive answer still proves the solver accepts the input
        let unknown = echo_solver("mumbler", "unknown");
        assert!(admit_seed(&seed, &unknown, &[], &[]).is_ok());

        let crashy = TargetSolver {
            profile: sh_profile("crashy", "exit 3"),
            logics: Vec::new(),
        };
        let err = admit_seed(&seed, &crashy, &[], &[]).unwrap_err();
        assert!(err.contains("probe"), "{err}");
    }

    #[test]
    fn structural_hash_ignores_provenance_chatter() {
        let a = parse_script(
            "(set-info :source |fuzzer|)(set-logic QF_UF)(declare-const p Bool)(assert p)(check-sat)",
        )
        .unwrap();
        let b = parse_script(
            "(set-option :produce-models true)(set-logic QF_UF)(declare-const p Bool)(assert p)(check-sat)",
        )
        .unwrap();
        assert_eq!(structural_hash(&a), structural_hash(&b));

        let c = parse_script(
            "(set-logic QF_UF)(declare-const p Bool)(assert (not p))(check-sat)",
        )
        .unwrap();
        assert_ne!(structural_hash(&a), structural_hash(&c));
    }

    #[test]
    fn campaign_finds_the_planted_bug_and_replays_byte_identically() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let seeds_dir = root.join("seeds");
        std::fs::create_dir(&seeds_dir).unwrap();
        std::fs::write(
            seeds_dir.join("trig.smt2"),
            "(set-logic QF_UF)\n\
             (declare-const storm_marker Bool)\n\
             (declare-const aa Bool)\n\
             (declare-const bb Bool)\n\
             (assert storm_marker)\n\
             (assert (or aa bb))\n\
             (assert (=> aa storm_marker))\n\
             (check-sat)\n",
        )
        .unwrap();
        std::fs::write(
            seeds_dir.join("pure.smt2"),
            "(set-logic QF_LIA)\n\
             (declare-const x Int)\n\
             (declare-const y Int)\n\
             (assert (<= x y))\n\
             (assert (>= (+ x y) 0))\n\
             (check-sat)\n",
        )
        .unwrap();

        let out = root.join("out");
        let cfg = campaign_cfg(
            vec![format!("{}/*.smt2", seeds_dir.display())],
            vec![echo_solver("clean", "sat"), trigger_solver("buggy", 2)],
            &out,
        );

        let report = run_campaign(&cfg).unwrap();
        assert_eq!(report.seeds, 2);
        assert_eq!(report.solvers, 2);
        assert_eq!(report.pairs, 4);
        assert!(report.skipped.is_empty(), "{:?}", report.skipped);

        // the planted hole fires on the marker seed only
        assert_eq!(report.bugs.len(), 1, "txt:\n{}", report.render_text());
        assert_eq!(report.duplicate_bugs, 0);
        assert!(report.observations.is_empty());
        let bug = &report.bugs[0];
        assert_eq!(bug.report.solver, "buggy");
        assert!(bug.id.starts_with("buggy__trig__iter"));

        // tallies are internally consistent and agree across both axes
        let seed_total: u64 = report.per_seed.values().map(|t| t.instances).sum();
        let solver_total: u64 = report.per_solver.values().map(|t| t.instances).sum();
        assert!(report.per_seed.values().all(Tally::consistent));
        assert!(report.per_solver.values().all(Tally::consistent));
        assert_eq!(seed_total, solver_total);
        let runs = std::fs::read_to_string(out.join("runs.jsonl")).unwrap();
        assert_eq!(runs.lines().count() as u64, seed_total);

        // the clean solver fuzzed both seeds to the full budget, the buggy
        // one stopped the marker seed at the first hit
        assert_eq!(report.per_solver["clean"].instances, 80);
        assert!(report.per_solver["buggy"].instances < 80);
        assert_eq!(report.per_solver["clean"].unsat, 0);
        assert_eq!(report.per_solver["buggy"].unsat, 1);

        // artifact tree: report, triggering instance, shrunken instance,
        // stage trace
        let bug_dir = out.join("bugs").join(&bug.id);
        assert!(bug_dir.join("report.json").is_file());
        assert!(bug_dir.join("min.smt2").is_file());
        assert!(bug_dir.join("trace.json").is_file());
        let mutant_name = Path::new(&bug.report.instance_path)
            .file_name()
            .unwrap()
            .to_owned();
        assert!(bug_dir.join(&mutant_name).is_file());
        let min = bug.minimization.as_ref().expect("bug was minimized");
        assert!(min.reproducible);
        assert!(min.minimized.bytes <= min.original.bytes);

        // a second run over the same tree reproduces runs.jsonl exactly,
        // workers and all
        let report2 = run_campaign(&cfg).unwrap();
        let runs2 = std::fs::read_to_string(out.join("runs.jsonl")).unwrap();
        assert_eq!(runs, runs2);
        assert_eq!(report2.bugs.len(), 1);

        // standalone re-minimization from the artifact alone
        let (artifact, trace) =
            minimize_bug_artifact(&bug_dir.join("report.json")).unwrap();
        assert!(artifact.minimization.unwrap().reproducible);
        assert!(!trace.is_empty());
        assert!(artifact.report.minimized_path.is_some());
    }
}
