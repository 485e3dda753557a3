//! Predicate pools: fragmentation of seed assertions into valuated
//! predicates, and the random recombination pool built from them.
//!
//! Both pools map Boolean terms to their truth value under one fixed
//! assignment. Instances asserted later only ever draw from these maps, so
//! the truth of everything they assert is known without calling a solver.

use indexmap::IndexMap;
use rand::Rng;

use crate::error::{Error, Result};
use crate::oracle::{PredicateEvaluator, TruthValue};
use crate::smtlib::ast::{Script, Term};
use crate::smtlib::enumerate_predicates;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    Initial,
    Construction,
}

/// Insertion-ordered map of valuated predicates. Entries are unique, never
/// UNDETERMINED, and never deeper than the depth bound fixed at creation.
#[derive(Clone, Debug, PartialEq)]
pub struct Pool {
    kind: PoolKind,
    d_max: u32,
    entries: IndexMap<Term, TruthValue>,
}

impl Pool {
    pub fn new(kind: PoolKind, d_max: u32) -> Pool {
        Pool {
            kind,
            d_max,
            entries: IndexMap::new(),
        }
    }

    pub fn kind(&self) -> PoolKind {
        self.kind
    }

    pub fn depth_bound(&self) -> u32 {
        self.d_max
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Add an entry. Returns false (and changes nothing) for duplicates,
    /// UNDETERMINED values, and terms deeper than the pool's bound.
    pub fn insert(&mut self, t: Term, v: TruthValue) -> bool {
        if v == TruthValue::Undetermined
            || t.depth() > self.d_max
            || self.entries.contains_key(&t)
        {
            return false;
        }
        self.entries.insert(t, v);
        true
    }

    pub fn get(&self, t: &Term) -> Option<TruthValue> {
        self.entries.get(t).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Term, TruthValue)> {
        self.entries.iter().map(|(t, v)| (t, *v))
    }

    /// Uniform draw by insertion index.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (&Term, TruthValue) {
        let (t, v) = self
            .entries
            .get_index(rng.random_range(0..self.entries.len()))
            .expect("sample called on an empty pool");
        (t, *v)
    }

    /// One `VALUE<TAB>term` line per entry, for diagnostics.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (t, v) in self.entries() {
            out.push_str(&v.to_string());
            out.push('\t');
            out.push_str(&crate::smtlib::print_term(t));
            out.push('\n');
        }
        out
    }
}

/// Fragment every assertion of `s` into its Boolean (sub-)predicates, keep
/// those within the depth bound, and valuate them under the evaluator's
/// assignment. Predicates the evaluator cannot decide are dropped.
pub fn populate_initial_pool<E: PredicateEvaluator + ?Sized>(
    s: &Script,
    d_max: u32,
    eval: &mut E,
) -> Result<Pool> {
    let mut preds: Vec<Term> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for assert in s.assertions() {
        for p in enumerate_predicates(assert) {
            if p.depth() <= d_max && seen.insert(p.clone()) {
                preds.push(p);
            }
        }
    }
    if preds.is_empty() {
        return Err(Error::EmptyPool(format!(
            "no predicate of depth <= {d_max} in {} assertions",
            s.assertions().len()
        )));
    }
    let values = eval.evaluate_all(&preds)?;
    let mut pool = Pool::new(PoolKind::Initial, d_max);
    let mut undetermined = 0usize;
    for (p, v) in preds.into_iter().zip(values) {
        if !pool.insert(p, v) {
            undetermined += 1;
        }
    }
    if pool.is_empty() {
        return Err(Error::EmptyPool(format!(
            "all {undetermined} predicates valuated UNDETERMINED"
        )));
    }
    Ok(pool)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BuildOp {
    And,
    Not,
}

/// Coin flip between the two construction operators.
pub fn rand_op<R: Rng>(rng: &mut R) -> BuildOp {
    if rng.random::<bool>() {
        BuildOp::And
    } else {
        BuildOp::Not
    }
}

/// Draw a valuated formula: 30% from the initial pool, otherwise from the
/// construction pool; an empty construction pool falls back to initial.
pub fn rand_formula<'p, R: Rng>(
    p_init: &'p Pool,
    p_constr: &'p Pool,
    rng: &mut R,
) -> (&'p Term, TruthValue) {
    let from_initial = rng.random_range(0..10u32) < 3;
    if from_initial || p_constr.is_empty() {
        p_init.sample(rng)
    } else {
        p_constr.sample(rng)
    }
}

/// Why a construction pool stopped short of its target size.
#[derive(Clone, Debug)]
pub struct Stall {
    pub attempts: u64,
    pub target: usize,
    pub reached: usize,
}

impl std::fmt::Display for Stall {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "construction stalled at {}/{} entries after {} attempts",
            self.reached, self.target, self.attempts
        )
    }
}

/// Grow a construction pool to `nc` entries by repeatedly conjoining or
/// negating random draws. Duplicates and over-deep terms do not count; the
/// loop gives up after 50*nc attempts so exhausted term spaces terminate.
pub fn populate_construction_pool<R: Rng>(
    p_init: &Pool,
    nc: usize,
    d_max: u32,
    rng: &mut R,
) -> (Pool, Option<Stall>) {
    let mut pool = Pool::new(PoolKind::Construction, d_max);
    let limit = 50 * nc as u64;
    let mut attempts = 0u64;
    while pool.len() < nc && attempts < limit {
        attempts += 1;
        let (t, v) = match rand_op(rng) {
            BuildOp::And => {
                let (f1, v1) = rand_formula(p_init, &pool, rng);
                let f1 = f1.clone();
                let (f2, v2) = rand_formula(p_init, &pool, rng);
                (Term::and(f1, f2.clone()), v1.and(v2))
            }
            BuildOp::Not => {
                let (f, v) = rand_formula(p_init, &pool, rng);
                (Term::not(f.clone()), v.negate())
            }
        };
        pool.insert(t, v);
    }
    let stall = (pool.len() < nc).then(|| Stall {
        attempts,
        target: nc,
        reached: pool.len(),
    });
    (pool, stall)
}

/// Distinct predicates of depth <= d_max that fragmentation would yield,
/// before valuation. Campaign sizing uses this so budgets are settled
/// without consulting the oracle (dropped UNDETERMINED entries shrink the
/// pool afterwards, which only errs towards larger budgets).
pub fn candidate_predicate_count(s: &Script, d_max: u32) -> usize {
    let mut seen = std::collections::HashSet::new();
    for assert in s.assertions() {
        for p in enumerate_predicates(assert) {
            if p.depth() <= d_max {
                seen.insert(p);
            }
        }
    }
    seen.len()
}

/// Campaign sizing rule: scale the construction-pool and mutant budgets
/// linearly with the initial pool's size. Initial pools of 10 entries or
/// fewer get the small ends of the ranges; 2000 or more get the large ends.
pub fn scaled_budgets_in(
    initial_pool_len: usize,
    nc_range: (usize, usize),
    nm_range: (usize, usize),
) -> (usize, usize) {
    let clamped = initial_pool_len.clamp(10, 2000) as f64;
    let t = (clamped - 10.0) / 1990.0;
    let lerp = |(lo, hi): (usize, usize)| (lo as f64 + (hi as f64 - lo as f64) * t).round() as usize;
    (lerp(nc_range), lerp(nm_range))
}

/// `scaled_budgets_in` with the stock ranges: 200..=1500 constructions and
/// 300..=1000 mutants.
pub fn scaled_budgets(initial_pool_len: usize) -> (usize, usize) {
    scaled_budgets_in(initial_pool_len, (200, 1500), (300, 1000))
}
