//! Bug-instance shrinking by binary search over the generation bounds.
//!
//! Instead of deleting pieces of the failing instance (which would need a
//! second trusted solver to confirm satisfiability), the search re-runs the
//! fuzzing loop from the failing instance with progressively tighter
//! assertion and depth budgets. Everything the loop produces is satisfiable
//! by construction, so any unsat answer found at a tighter bound is again a
//! genuine bug, only smaller.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{fuzz, Bug, FuzzConfig};
use crate::oracle::PredicateEvaluator;
use crate::runner::{run_solver, InstanceInput, SolverProfile, Verdict};
use crate::smtlib::ast::Script;
use crate::util::derive_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Assertions,
    Depth,
}

/// One probe of the binary search: the bound tried and whether fuzzing at
/// that bound reproduced the bug.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub stage: Stage,
    pub bound: u32,
    pub found: bool,
}

/// Outcome of one search stage.
#[derive(Debug)]
pub struct StageResult {
    /// the smallest accepted bug instance, or the input when none was found
    pub script: Script,
    /// every accepted intermediate, oldest first
    pub accepted: Vec<Script>,
    pub fuzz_calls: u32,
    pub trace: Vec<TraceStep>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeStats {
    pub bytes: usize,
    pub asserts: usize,
    pub depth: u32,
}

impl SizeStats {
    pub fn of(s: &Script) -> SizeStats {
        SizeStats {
            bytes: s.to_text().len(),
            asserts: s.assertions().len(),
            depth: s.max_assert_depth(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct MinimizationResult {
    pub original: SizeStats,
    pub minimized: SizeStats,
    pub fuzz_calls: u32,
    pub trace: Vec<TraceStep>,
    /// false when the closing re-check had to fall back to an earlier
    /// intermediate (or to the original) to see unsat again
    pub reproducible: bool,
    #[serde(skip)]
    pub script: Script,
}

/// Ties in the stage metric break by byte length, then by instance path
/// (in-memory probes all have an empty path, which leaves the earliest
/// generated instance).
fn smallest_bug(bugs: &[Bug], stage: Stage) -> &Bug {
    bugs.iter()
        .min_by_key(|b| {
            let primary = match stage {
                Stage::Assertions => b.instance.assertion_count() as u64,
                Stage::Depth => b.instance.max_depth() as u64,
            };
            (
                primary,
                b.instance.to_text().len(),
                b.report.instance_path.clone(),
            )
        })
        .expect("smallest_bug called with at least one bug")
}

/// Generic half of both stages: probe the midpoint bound, keep the
/// smallest bug and search below it on success, search above on failure.
fn search_stage<E: PredicateEvaluator + ?Sized>(
    stage: Stage,
    s: &Script,
    cfg: &FuzzConfig,
    lo: u32,
    hi: u32,
    eval: &mut E,
    target: &SolverProfile,
) -> Result<StageResult> {
    let mut result = StageResult {
        script: s.clone(),
        accepted: Vec::new(),
        fuzz_calls: 0,
        trace: Vec::new(),
    };
    let stage_seed = derive_seed(
        cfg.rng_seed,
        match stage {
            Stage::Assertions => "minimize-assertions",
            Stage::Depth => "minimize-depth",
        },
    );
    let (mut lo, mut hi) = (lo, hi);
    let mut current = s.clone();
    while lo < hi {
        let bound = lo + (hi - lo) / 2;
        let probe_cfg = match stage {
            Stage::Assertions => FuzzConfig {
                a_max: bound,
                rng_seed: stage_seed,
                ..cfg.clone()
            },
            Stage::Depth => FuzzConfig {
                d_max: bound,
                rng_seed: stage_seed,
                ..cfg.clone()
            },
        };
        // a depth bound below the shallowest predicate empties the pool;
        // that is a clean "not found", not an error
        let outcome = match fuzz(&current, "minimize", &probe_cfg, eval, target, &[], None) {
            Ok(o) => Some(o),
            Err(e) if e.is_seed_skip() => None,
            Err(e) => return Err(e),
        };
        result.fuzz_calls += 1;
        let bugs = outcome.map(|o| o.bugs).unwrap_or_default();
        let found = !bugs.is_empty();
        result.trace.push(TraceStep { stage, bound, found });
        if found {
            current = smallest_bug(&bugs, stage).instance.to_script();
            result.accepted.push(current.clone());
            hi = bound;
        } else {
            lo = bound + 1;
        }
    }
    result.script = current;
    Ok(result)
}

/// Binary search for the smallest assertion budget that still reproduces
/// the bug; returns the smallest reproducing instance found along the way.
pub fn minimize_assertions<E: PredicateEvaluator + ?Sized>(
    s: &Script,
    cfg: &FuzzConfig,
    a_min: u32,
    a_max: u32,
    eval: &mut E,
    target: &SolverProfile,
) -> Result<StageResult> {
    search_stage(Stage::Assertions, s, cfg, a_min, a_max, eval, target)
}

/// Same search over the formula-depth budget.
pub fn minimize_depth<E: PredicateEvaluator + ?Sized>(
    s: &Script,
    cfg: &FuzzConfig,
    d_min: u32,
    d_max: u32,
    eval: &mut E,
    target: &SolverProfile,
) -> Result<StageResult> {
    search_stage(Stage::Depth, s, cfg, d_min, d_max, eval, target)
}

fn elicits_unsat(target: &SolverProfile, s: &Script) -> bool {
    run_solver(target, InstanceInput::Text(&s.to_text()))
        .map(|o| o.verdict == Verdict::Unsat)
        .unwrap_or(false)
}

/// Hook for an external syntactic shrinker run after the bound search. A
/// refinement is kept only when it is still a bug and strictly smaller; the
/// search itself never needs one.
pub trait PostPass {
    fn refine(&self, s: &Script) -> Option<Script>;
}

/// Shrink a bug instance: search the assertion bound, then the depth bound
/// (or the other way around with `depth_first`), re-check the result, and
/// report before/after size statistics.
pub fn minimize<E: PredicateEvaluator + ?Sized>(
    bug_instance: &Script,
    cfg: &FuzzConfig,
    eval: &mut E,
    target: &SolverProfile,
    depth_first: bool,
) -> Result<MinimizationResult> {
    let original = SizeStats::of(bug_instance);
    let mut chain: Vec<Script> = vec![bug_instance.clone()];
    let mut trace = Vec::new();
    let mut fuzz_calls = 0;

    let mut current = bug_instance.clone();
    let mut cfg = cfg.clone();
    // the bug in hand already exhibits itself at its own size; searching
    // bounds above that wastes probes and lets a probe regrow the instance
    cfg.a_max = (original.asserts as u32).clamp(1, cfg.a_max);
    cfg.d_max = original.depth.clamp(1, cfg.d_max);
    let stages = if depth_first {
        [Stage::Depth, Stage::Assertions]
    } else {
        [Stage::Assertions, Stage::Depth]
    };
    for stage in stages {
        let r = match stage {
            Stage::Assertions => {
                minimize_assertions(&current, &cfg, 1, cfg.a_max, eval, target)?
            }
            Stage::Depth => minimize_depth(&current, &cfg, 1, cfg.d_max, eval, target)?,
        };
        fuzz_calls += r.fuzz_calls;
        trace.extend(r.trace);
        chain.extend(r.accepted);
        current = r.script;
        // tighten the other stage's budget to what this stage settled on,
        // so later probes cannot regrow the instance
        match stage {
            Stage::Assertions => {
                cfg.a_max = (current.assertions().len() as u32).clamp(1, cfg.a_max);
            }
            Stage::Depth => {
                cfg.d_max = current.max_assert_depth().clamp(1, cfg.d_max);
            }
        }
    }

    // a candidate never beats the original by growing either measure; ties
    // keep the original byte-for-byte
    let improves = |c: &SizeStats| {
        c.asserts <= original.asserts
            && c.depth <= original.depth
            && (c.asserts < original.asserts || c.depth < original.depth || c.bytes < original.bytes)
    };

    // closing re-check over the improving part of the accepted chain, newest
    // first; fall back along it when the target has stopped reproducing
    // (possible with flaky real solvers). A late accept that grew a measure
    // must not shadow an earlier genuine shrink.
    let mut reproducible = true;
    let mut kept: Option<Script> = None;
    for candidate in chain.iter().rev() {
        if !improves(&SizeStats::of(candidate)) {
            continue;
        }
        if elicits_unsat(target, candidate) {
            kept = Some(candidate.clone());
            break;
        }
        reproducible = false;
    }
    let script = kept.unwrap_or_else(|| bug_instance.clone());

    Ok(MinimizationResult {
        original,
        minimized: SizeStats::of(&script),
        fuzz_calls,
        trace,
        reproducible,
        script,
    })
}

/// `minimize`, then offer the result to an external shrinker. The refined
/// script replaces the result only when it regresses neither measure, saves
/// bytes, and still elicits unsat from the target.
pub fn minimize_with_post_pass<E: PredicateEvaluator + ?Sized>(
    bug_instance: &Script,
    cfg: &FuzzConfig,
    eval: &mut E,
    target: &SolverProfile,
    depth_first: bool,
    post: Option<&dyn PostPass>,
) -> Result<MinimizationResult> {
    let mut r = minimize(bug_instance, cfg, eval, target, depth_first)?;
    if let Some(pass) = post {
        if let Some(refined) = pass.refine(&r.script) {
            let stats = SizeStats::of(&refined);
            let keeps_shape =
                stats.asserts <= r.minimized.asserts && stats.depth <= r.minimized.depth;
            if keeps_shape && stats.bytes < r.minimized.bytes && elicits_unsat(target, &refined) {
                r.script = refined;
                r.minimized = stats;
            }
        }
    }
    Ok(r)
}
