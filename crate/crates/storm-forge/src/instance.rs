//! Assembly of satisfiable-by-construction instances from the pools, and
//! the per-seed fuzzing loop that feeds them to a solver under test.
//!
//! Every asserted formula is drawn from a pool together with its truth
//! value and negated when that value is FALSE, so the asserted set is
//! satisfied by the campaign assignment no matter how the draws fall. A
//! solver that answers unsat on any of these instances is wrong.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{PredicateEvaluator, TruthValue};
use crate::pools::{populate_construction_pool, populate_initial_pool, rand_formula, Pool, Stall};
use crate::runner::{
    classify, run_solver, BugClass, BugReport, InstanceInput, RunRecord, SolverProfile,
};
use crate::smtlib::ast::{Command, Script, Symbol, Term};
use crate::smtlib::sexpr::parse_sexprs;

/// Campaign knobs for one seed: construction-pool size, mutant count, depth
/// and assertion bounds, the instance shape, and the random stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub nc: usize,
    pub nm: usize,
    pub d_max: u32,
    pub a_max: u32,
    pub incremental: bool,
    pub rng_seed: u64,
}

impl FuzzConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nm < 1 {
            return Err(Error::Config("nm must be at least 1".into()));
        }
        if self.d_max < 1 {
            return Err(Error::Config("d_max must be at least 1".into()));
        }
        if self.a_max < 1 {
            return Err(Error::Config("a_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Where an instance came from, embedded in its text for triage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub seed_id: String,
    pub rng_seed: u64,
    pub iteration: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StackCmd {
    Assert(Term),
    Push,
    Pop,
    CheckSat,
}

/// One generated mutant: the seed's declarations plus a fresh command
/// stream of assertions, stack operations, and satisfiability checks.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub logic: Option<Symbol>,
    pub declarations: Vec<Command>,
    pub commands: Vec<StackCmd>,
    pub provenance: Provenance,
}

impl Instance {
    pub fn file_name(&self) -> String {
        format!("mutant-{}.smt2", self.provenance.iteration)
    }

    pub fn assertion_count(&self) -> usize {
        self.commands
            .iter()
            .filter(|c| matches!(c, StackCmd::Assert(_)))
            .count()
    }

    pub fn max_depth(&self) -> u32 {
        self.commands
            .iter()
            .filter_map(|c| match c {
                StackCmd::Assert(t) => Some(t.depth()),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Balanced stack, no pop below the bottom, at least one check.
    pub fn validate(&self) -> Result<()> {
        let mut depth = 0i64;
        let mut checks = 0usize;
        for c in &self.commands {
            match c {
                StackCmd::Push => depth += 1,
                StackCmd::Pop => {
                    depth -= 1;
                    if depth < 0 {
                        return Err(Error::Config("pop underflows the stack".into()));
                    }
                }
                StackCmd::CheckSat => checks += 1,
                StackCmd::Assert(_) => {}
            }
        }
        if depth != 0 {
            return Err(Error::Config(format!("unbalanced push/pop (depth {depth})")));
        }
        if checks == 0 {
            return Err(Error::Config("instance has no check-sat".into()));
        }
        Ok(())
    }

    /// For each check point in order, the assertions active at it.
    pub fn checkpoint_prefixes(&self) -> Vec<Vec<&Term>> {
        let mut frames: Vec<usize> = Vec::new();
        let mut active: Vec<&Term> = Vec::new();
        let mut out = Vec::new();
        for c in &self.commands {
            match c {
                StackCmd::Assert(t) => active.push(t),
                StackCmd::Push => frames.push(active.len()),
                StackCmd::Pop => {
                    let mark = frames.pop().expect("validated instances never underflow");
                    active.truncate(mark);
                }
                StackCmd::CheckSat => out.push(active.clone()),
            }
        }
        out
    }

    pub fn to_script(&self) -> Script {
        let mut commands = Vec::with_capacity(self.declarations.len() + self.commands.len() + 2);
        if let Some(logic) = &self.logic {
            commands.push(Command::SetLogic(logic.clone()));
        }
        commands.push(provenance_info(&self.provenance));
        commands.extend(self.declarations.iter().cloned());
        for c in &self.commands {
            commands.push(match c {
                StackCmd::Assert(t) => Command::Assert(t.clone()),
                StackCmd::Push => Command::Push(1),
                StackCmd::Pop => Command::Pop(1),
                StackCmd::CheckSat => Command::CheckSat,
            });
        }
        Script { commands }
    }

    pub fn to_text(&self) -> String {
        self.to_script().to_text()
    }
}

fn provenance_info(p: &Provenance) -> Command {
    let escaped = p.seed_id.replace('"', "\"\"");
    let line = format!(
        "(set-info :storm-provenance \"seed={} rng={} iter={}\")",
        escaped, p.rng_seed, p.iteration
    );
    let sx = parse_sexprs(&line)
        .ok()
        .and_then(|mut v| (v.len() == 1).then(|| v.remove(0)))
        .expect("provenance line is well-formed by construction");
    Command::Passthrough(sx)
}

/// Per-seed fixed parts of every generated instance.
#[derive(Clone, Debug)]
pub struct InstanceBase {
    pub seed_id: String,
    pub rng_seed: u64,
    pub logic: Option<Symbol>,
    pub declarations: Vec<Command>,
}

impl InstanceBase {
    pub fn from_script(s: &Script, seed_id: &str, rng_seed: u64) -> InstanceBase {
        InstanceBase {
            seed_id: seed_id.to_string(),
            rng_seed,
            logic: s.logic().cloned(),
            declarations: s.declarations().into_iter().cloned().collect(),
        }
    }

    fn instance(&self, iteration: u64, commands: Vec<StackCmd>) -> Instance {
        Instance {
            logic: self.logic.clone(),
            declarations: self.declarations.clone(),
            commands,
            provenance: Provenance {
                seed_id: self.seed_id.clone(),
                rng_seed: self.rng_seed,
                iteration,
            },
        }
    }
}

fn draw_assert<R: Rng>(p_init: &Pool, p_constr: &Pool, rng: &mut R) -> Term {
    let (f, v) = rand_formula(p_init, p_constr, rng);
    match v {
        TruthValue::True => f.clone(),
        TruthValue::False => Term::not(f.clone()),
        TruthValue::Undetermined => unreachable!("pools never hold undetermined entries"),
    }
}

/// Plain mutant: 1..=a_max assertions and a single closing check.
pub fn generate_instance<R: Rng>(
    base: &InstanceBase,
    p_init: &Pool,
    p_constr: &Pool,
    a_max: u32,
    rng: &mut R,
    iteration: u64,
) -> Instance {
    let ac = rng.random_range(1..=a_max);
    let mut commands = Vec::with_capacity(ac as usize + 1);
    for _ in 0..ac {
        commands.push(StackCmd::Assert(draw_assert(p_init, p_constr, rng)));
    }
    commands.push(StackCmd::CheckSat);
    base.instance(iteration, commands)
}

/// Incremental mutant: the command stream climbs to a nesting depth of
/// 1..=4 and back down, with 1..=a_max assertions spread uniformly over the
/// stack frames and 1..=4 checks spread over all points of the climb,
/// descent included (a check right after a pop is the interesting case for
/// incremental solvers).
pub fn generate_incremental_instance<R: Rng>(
    base: &InstanceBase,
    p_init: &Pool,
    p_constr: &Pool,
    a_max: u32,
    rng: &mut R,
    iteration: u64,
) -> Instance {
    let nesting = rng.random_range(1..=4u32);
    let checks = rng.random_range(1..=4u32);
    let ac = rng.random_range(1..=a_max);

    // stations: ascending levels 0..=nesting, then descending back to 0
    let station_count = 2 * nesting + 1;
    let mut asserts_at = vec![0u32; nesting as usize + 1];
    for _ in 0..ac {
        asserts_at[rng.random_range(0..=nesting) as usize] += 1;
    }
    let mut checks_at = vec![0u32; station_count as usize];
    for _ in 0..checks {
        checks_at[rng.random_range(0..station_count) as usize] += 1;
    }

    let mut commands = Vec::new();
    for station in 0..station_count {
        let ascending = station <= nesting;
        if station > 0 {
            commands.push(if ascending { StackCmd::Push } else { StackCmd::Pop });
        }
        if ascending {
            for _ in 0..asserts_at[station as usize] {
                commands.push(StackCmd::Assert(draw_assert(p_init, p_constr, rng)));
            }
        }
        for _ in 0..checks_at[station as usize] {
            commands.push(StackCmd::CheckSat);
        }
    }
    base.instance(iteration, commands)
}

/// A mutant the solver under test answered unsat on, with its report.
#[derive(Clone, Debug)]
pub struct Bug {
    pub report: BugReport,
    pub instance: Instance,
}

#[derive(Debug, Default)]
pub struct FuzzOutcome {
    /// class-A hits: verdict unsat on a satisfiable instance
    pub bugs: Vec<Bug>,
    /// class-C/D observations (incompleteness, crashes)
    pub observations: Vec<BugReport>,
    pub records: Vec<RunRecord>,
    pub construction_stall: Option<Stall>,
    pub initial_pool_len: usize,
    pub construction_pool_len: usize,
}

/// Write through a uniquely named sibling and rename into place. The mutant
/// stream for a seed depends only on the seed and the rng seed, so parallel
/// runs against different solvers may emit the same file; readers must never
/// observe a half-written instance.
fn write_atomically(path: &Path, text: &str) -> std::io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp-{}-{n}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)
}

/// Build both pools from the seed, then generate and run `cfg.nm` mutants
/// against the target solver. Mutant files are written under `out_dir` when
/// given; otherwise instances are piped from memory.
pub fn fuzz<E: PredicateEvaluator + ?Sized>(
    seed: &Script,
    seed_id: &str,
    cfg: &FuzzConfig,
    eval: &mut E,
    target: &SolverProfile,
    decidable: &[String],
    out_dir: Option<&Path>,
) -> Result<FuzzOutcome> {
    fuzz_inner(seed, seed_id, cfg, eval, target, decidable, out_dir, false)
}

/// `fuzz`, but the loop stops right after the first class-A answer; a
/// soundness bug makes further mutants of the same seed redundant, and the
/// saved budget goes to minimization instead. Class C and D observations
/// never stop the loop.
pub fn fuzz_to_first_bug<E: PredicateEvaluator + ?Sized>(
    seed: &Script,
    seed_id: &str,
    cfg: &FuzzConfig,
    eval: &mut E,
    target: &SolverProfile,
    decidable: &[String],
    out_dir: Option<&Path>,
) -> Result<FuzzOutcome> {
    fuzz_inner(seed, seed_id, cfg, eval, target, decidable, out_dir, true)
}

#[allow(clippy::too_many_arguments)]
fn fuzz_inner<E: PredicateEvaluator + ?Sized>(
    seed: &Script,
    seed_id: &str,
    cfg: &FuzzConfig,
    eval: &mut E,
    target: &SolverProfile,
    decidable: &[String],
    out_dir: Option<&Path>,
    stop_on_class_a: bool,
) -> Result<FuzzOutcome> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let p_init = populate_initial_pool(seed, cfg.d_max, eval)?;
    let (p_constr, construction_stall) =
        populate_construction_pool(&p_init, cfg.nc, cfg.d_max, &mut rng);

    let base = InstanceBase::from_script(seed, seed_id, cfg.rng_seed);
    let logic_str = base.logic.as_ref().map(|l| l.to_string());
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }

    let mut outcome = FuzzOutcome {
        construction_stall,
        initial_pool_len: p_init.len(),
        construction_pool_len: p_constr.len(),
        ..FuzzOutcome::default()
    };

    for iteration in 0..cfg.nm as u64 {
        let instance = if cfg.incremental {
            generate_incremental_instance(&base, &p_init, &p_constr, cfg.a_max, &mut rng, iteration)
        } else {
            generate_instance(&base, &p_init, &p_constr, cfg.a_max, &mut rng, iteration)
        };
        let text = instance.to_text();

        let path: Option<PathBuf> = match out_dir {
            Some(dir) => {
                let p = dir.join(instance.file_name());
                write_atomically(&p, &text)?;
                Some(p)
            }
            None => None,
        };
        let run = match &path {
            Some(p) => run_solver(target, InstanceInput::OnDisk(p))?,
            None => run_solver(target, InstanceInput::Text(&text))?,
        };
        let instance_path = path
            .as_deref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();

        outcome.records.push(RunRecord {
            seed: seed_id.to_string(),
            iter: iteration,
            solver: target.id.clone(),
            verdict: run.verdict,
            wall_time: if run.verdict == crate::runner::Verdict::Timeout {
                target.timeout.as_secs()
            } else {
                run.wall.as_secs()
            },
            exit_code: run.exit_code,
            instance_path: instance_path.clone(),
        });

        if let Some(class) = classify(&run, logic_str.as_deref(), decidable) {
            let report = BugReport {
                class,
                solver: target.id.clone(),
                logic: logic_str.clone(),
                seed_file: seed_id.to_string(),
                rng_seed: cfg.rng_seed,
                iter: iteration,
                verdict: run.verdict,
                exit_code: run.exit_code,
                instance_path,
                minimized_path: None,
                stdout_excerpt: run.stdout_excerpt,
                stderr_excerpt: run.stderr_excerpt,
            };
            if class == BugClass::A {
                outcome.bugs.push(Bug {
                    report,
                    instance,
                });
                if stop_on_class_a {
                    break;
                }
            } else {
                outcome.observations.push(report);
            }
        }
    }
    Ok(outcome)
}
