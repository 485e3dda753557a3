//! Python bindings over the fuzzer core.
//!
//! The surface mirrors what the CLI does one layer down: parse and print
//! SMT-LIB scripts, valuate predicates under an assignment, fragment seeds
//! into pools, generate satisfiable-by-construction mutants, and drive a
//! solver binary to hunt and shrink unsoundness bugs. Assignments are plain
//! `dict[str, bool]` over Boolean constants; for anything richer construct
//! an `Oracle` and let the trusted solver produce the assignment.

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use storm_forge::instance::{
    fuzz_to_first_bug, generate_incremental_instance, generate_instance, FuzzConfig,
    FuzzOutcome, InstanceBase,
};
use storm_forge::minimize::minimize as minimize_rs;
use storm_forge::oracle::{Assignment, OracleClient, TruthValue};
use storm_forge::pools::{populate_construction_pool, populate_initial_pool};
use storm_forge::runner::{run_solver, InputMode, InstanceInput, SolverProfile};
use storm_forge::smtlib::ast::{self, Sort, Term};
use storm_forge::smtlib::{parse_script, print_script, print_term};
use storm_forge::truth::LocalEvaluator;
use storm_forge::Error;

fn to_py_err(e: Error) -> PyErr {
    match &e {
        Error::Parse { .. }
        | Error::Sort(_)
        | Error::Unsupported(_)
        | Error::MissingBinding(_)
        | Error::SeedRejected(_)
        | Error::EmptyPool(_)
        | Error::Stall(_)
        | Error::Config(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn local_eval(assignment: HashMap<String, bool>) -> LocalEvaluator {
    LocalEvaluator::from_entries(assignment.into_iter().map(|(name, value)| {
        (
            Term::var(name.as_str(), Sort::bool_sort()),
            TruthValue::from_bool(value),
        )
    }))
}

/// A parsed SMT-LIB script. `str()` prints it back in canonical form.
#[pyclass(frozen)]
pub struct Script {
    inner: ast::Script,
}

#[pymethods]
impl Script {
    #[getter]
    fn logic(&self) -> Option<String> {
        self.inner.logic().map(|l| l.to_string())
    }

    #[getter]
    fn assert_count(&self) -> usize {
        self.inner.assertions().len()
    }

    #[getter]
    fn depth(&self) -> u32 {
        self.inner.max_assert_depth()
    }

    fn assertions(&self) -> Vec<String> {
        self.inner.assertions().iter().map(|t| print_term(t)).collect()
    }

    fn __str__(&self) -> String {
        print_script(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "<Script logic={} asserts={} depth={}>",
            self.logic().unwrap_or_else(|| "?".into()),
            self.assert_count(),
            self.depth()
        )
    }
}

#[pyfunction]
fn parse(text: &str) -> PyResult<Script> {
    Ok(Script {
        inner: parse_script(text).map_err(to_py_err)?,
    })
}

/// A solver under test: binary, argument template, timeout. File-mode
/// commands need exactly one `{file}` argument; pipe mode reads stdin.
#[pyclass]
pub struct Solver {
    profile: SolverProfile,
}

#[pymethods]
impl Solver {
    #[new]
    #[pyo3(signature = (id, cmd, *, timeout_ms = 2000, pipe = false, incremental = false))]
    fn new(
        id: &str,
        cmd: Vec<String>,
        timeout_ms: u64,
        pipe: bool,
        incremental: bool,
    ) -> PyResult<Solver> {
        let mut parts = cmd.into_iter();
        let binary: PathBuf = parts
            .next()
            .ok_or_else(|| PyValueError::new_err("cmd must start with the solver binary"))?
            .into();
        let profile = SolverProfile {
            id: id.to_string(),
            binary,
            args: parts.collect(),
            incremental,
            timeout: Duration::from_millis(timeout_ms),
            memory_limit_mb: None,
            input_mode: if pipe { InputMode::Pipe } else { InputMode::File },
        };
        profile.validate().map_err(to_py_err)?;
        Ok(Solver { profile })
    }

    /// One-shot run; returns the overall verdict as a string.
    fn check(&self, script: &Script) -> PyResult<String> {
        let text = print_script(&script.inner);
        let outcome =
            run_solver(&self.profile, InstanceInput::Text(&text)).map_err(to_py_err)?;
        Ok(outcome.verdict.as_str().to_string())
    }
}

/// What one fuzzing run saw: per-verdict counts, class-A bugs as scripts,
/// and class-C/D observations as short strings.
#[pyclass(frozen)]
pub struct Report {
    #[pyo3(get)]
    instances: usize,
    verdicts: HashMap<String, u64>,
    bugs: Vec<ast::Script>,
    #[pyo3(get)]
    observations: Vec<String>,
}

#[pymethods]
impl Report {
    #[getter]
    fn verdicts(&self) -> HashMap<String, u64> {
        self.verdicts.clone()
    }

    #[getter]
    fn bugs(&self) -> Vec<Script> {
        self.bugs.iter().map(|s| Script { inner: s.clone() }).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "<Report instances={} bugs={} observations={}>",
            self.instances,
            self.bugs.len(),
            self.observations.len()
        )
    }
}

impl Report {
    fn from_outcome(outcome: FuzzOutcome) -> Report {
        let mut verdicts: HashMap<String, u64> = HashMap::new();
        for r in &outcome.records {
            *verdicts.entry(r.verdict.as_str().to_string()).or_insert(0) += 1;
        }
        Report {
            instances: outcome.records.len(),
            verdicts,
            bugs: outcome.bugs.iter().map(|b| b.instance.to_script()).collect(),
            observations: outcome
                .observations
                .iter()
                .map(|o| format!("class {} {} at iter {}", o.class, o.verdict.as_str(), o.iter))
                .collect(),
        }
    }
}

/// Result of shrinking one bug instance.
#[pyclass(frozen)]
pub struct Shrunk {
    /// (bytes, asserts, depth) before
    #[pyo3(get)]
    original: (usize, usize, u32),
    /// (bytes, asserts, depth) after
    #[pyo3(get)]
    minimized: (usize, usize, u32),
    #[pyo3(get)]
    fuzz_calls: u32,
    #[pyo3(get)]
    reproducible: bool,
    script: ast::Script,
}

#[pymethods]
impl Shrunk {
    #[getter]
    fn script(&self) -> Script {
        Script {
            inner: self.script.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "<Shrunk {}B/{} asserts/depth {} -> {}B/{} asserts/depth {} in {} probes>",
            self.original.0,
            self.original.1,
            self.original.2,
            self.minimized.0,
            self.minimized.1,
            self.minimized.2,
            self.fuzz_calls
        )
    }
}

fn fuzz_config(
    nm: usize,
    nc: usize,
    d_max: u32,
    a_max: u32,
    rng_seed: u64,
    incremental: bool,
) -> FuzzConfig {
    FuzzConfig {
        nc,
        nm,
        d_max,
        a_max,
        incremental,
        rng_seed,
    }
}

/// Truth value of every assertion under the assignment; None when the
/// evaluator cannot decide.
#[pyfunction]
fn valuate(script: &Script, assignment: HashMap<String, bool>) -> Vec<Option<bool>> {
    let eval = local_eval(assignment);
    script
        .inner
        .assertions()
        .iter()
        .map(|t| match eval.truth(t) {
            TruthValue::True => Some(true),
            TruthValue::False => Some(false),
            TruthValue::Undetermined => None,
        })
        .collect()
}

/// Fragment the script's assertions into valuated sub-predicates of depth
/// at most `d_max`, dropping whatever the assignment cannot decide.
#[pyfunction]
fn initial_pool(
    script: &Script,
    d_max: u32,
    assignment: HashMap<String, bool>,
) -> PyResult<Vec<(String, bool)>> {
    let mut eval = local_eval(assignment);
    let pool = populate_initial_pool(&script.inner, d_max, &mut eval).map_err(to_py_err)?;
    Ok(pool
        .entries()
        .map(|(t, v)| (print_term(t), v == TruthValue::True))
        .collect())
}

/// Generate `nm` satisfiable-by-construction mutants without running any
/// solver. Same pipeline the fuzzer uses: fragment, valuate, recombine.
#[pyfunction]
#[pyo3(signature = (script, assignment, *, nm = 25, nc = 60, d_max = 16, a_max = 16, rng_seed = 0, incremental = false))]
#[allow(clippy::too_many_arguments)]
fn mutants(
    script: &Script,
    assignment: HashMap<String, bool>,
    nm: usize,
    nc: usize,
    d_max: u32,
    a_max: u32,
    rng_seed: u64,
    incremental: bool,
) -> PyResult<Vec<Script>> {
    let cfg = fuzz_config(nm, nc, d_max, a_max, rng_seed, incremental);
    cfg.validate().map_err(to_py_err)?;
    let mut eval = local_eval(assignment);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let p_init =
        populate_initial_pool(&script.inner, cfg.d_max, &mut eval).map_err(to_py_err)?;
    let (p_constr, _) = populate_construction_pool(&p_init, cfg.nc, cfg.d_max, &mut rng);
    let base = InstanceBase::from_script(&script.inner, "py", cfg.rng_seed);
    let out = (0..cfg.nm as u64)
        .map(|i| {
            let inst = if cfg.incremental {
                generate_incremental_instance(&base, &p_init, &p_constr, cfg.a_max, &mut rng, i)
            } else {
                generate_instance(&base, &p_init, &p_constr, cfg.a_max, &mut rng, i)
            };
            Script {
                inner: inst.to_script(),
            }
        })
        .collect();
    Ok(out)
}

/// Fuzz `solver` with mutants of `script`, stopping at the first soundness
/// bug. Every unsat answer is a bug; unknown on a decidable logic and
/// crashes are kept as observations.
#[pyfunction]
#[pyo3(signature = (script, assignment, solver, *, nm = 25, nc = 60, d_max = 16, a_max = 16, rng_seed = 0, incremental = false, decidable = vec!["QF_*".to_string()]))]
#[allow(clippy::too_many_arguments)]
fn fuzz(
    script: &Script,
    assignment: HashMap<String, bool>,
    solver: &Solver,
    nm: usize,
    nc: usize,
    d_max: u32,
    a_max: u32,
    rng_seed: u64,
    incremental: bool,
    decidable: Vec<String>,
) -> PyResult<Report> {
    let cfg = fuzz_config(nm, nc, d_max, a_max, rng_seed, incremental);
    let mut eval = local_eval(assignment);
    let outcome = fuzz_to_first_bug(
        &script.inner,
        "py",
        &cfg,
        &mut eval,
        &solver.profile,
        &decidable,
        None,
    )
    .map_err(to_py_err)?;
    Ok(Report::from_outcome(outcome))
}

/// Shrink a bug instance by binary search over the generation bounds,
/// re-fuzzing at each probe. The result still elicits unsat unless
/// `reproducible` says otherwise.
#[pyfunction]
#[pyo3(signature = (bug, assignment, solver, *, nm = 25, nc = 60, d_max = 16, a_max = 16, rng_seed = 0, depth_first = false))]
#[allow(clippy::too_many_arguments)]
fn shrink(
    bug: &Script,
    assignment: HashMap<String, bool>,
    solver: &Solver,
    nm: usize,
    nc: usize,
    d_max: u32,
    a_max: u32,
    rng_seed: u64,
    depth_first: bool,
) -> PyResult<Shrunk> {
    let cfg = fuzz_config(nm, nc, d_max, a_max, rng_seed, false);
    let mut eval = local_eval(assignment);
    let r = minimize_rs(&bug.inner, &cfg, &mut eval, &solver.profile, depth_first)
        .map_err(to_py_err)?;
    Ok(Shrunk {
        original: (r.original.bytes, r.original.asserts, r.original.depth),
        minimized: (r.minimized.bytes, r.minimized.asserts, r.minimized.depth),
        fuzz_calls: r.fuzz_calls,
        reproducible: r.reproducible,
        script: r.script,
    })
}

/// The trusted solver. Resolves like the CLI: explicit path, else the
/// STORM_ORACLE environment variable, else `z3` on PATH.
#[pyclass]
pub struct Oracle {
    client: OracleClient,
}

impl Oracle {
    fn assignment_for(&self, script: &ast::Script, rng_seed: u64) -> PyResult<Assignment> {
        self.client
            .generate_assignment(script, rng_seed)
            .map_err(to_py_err)
    }
}

#[pymethods]
impl Oracle {
    #[new]
    #[pyo3(signature = (binary = None, timeout_ms = 2000))]
    fn new(binary: Option<PathBuf>, timeout_ms: u64) -> PyResult<Oracle> {
        let client = OracleClient::locate(binary.as_deref(), Duration::from_millis(timeout_ms))
            .map_err(to_py_err)?;
        Ok(Oracle { client })
    }

    #[getter]
    fn binary(&self) -> String {
        self.client.binary().display().to_string()
    }

    /// Ask the trusted solver directly; returns its verdict as a string.
    fn ground_truth(&self, script: &Script) -> PyResult<String> {
        let v = self
            .client
            .check_ground_truth(&print_script(&script.inner))
            .map_err(to_py_err)?;
        Ok(v.as_str().to_string())
    }

    /// `fuzz`, but with the predicate assignment produced by the trusted
    /// solver, so seeds over any theory work.
    #[pyo3(signature = (script, solver, *, nm = 25, nc = 60, d_max = 16, a_max = 16, rng_seed = 0, incremental = false, decidable = vec!["QF_*".to_string()]))]
    #[allow(clippy::too_many_arguments)]
    fn fuzz(
        &self,
        script: &Script,
        solver: &Solver,
        nm: usize,
        nc: usize,
        d_max: u32,
        a_max: u32,
        rng_seed: u64,
        incremental: bool,
        decidable: Vec<String>,
    ) -> PyResult<Report> {
        let cfg = fuzz_config(nm, nc, d_max, a_max, rng_seed, incremental);
        let assignment = self.assignment_for(&script.inner, cfg.rng_seed)?;
        let mut eval = self.client.evaluator(&script.inner, assignment);
        let outcome = fuzz_to_first_bug(
            &script.inner,
            "py",
            &cfg,
            &mut eval,
            &solver.profile,
            &decidable,
            None,
        )
        .map_err(to_py_err)?;
        Ok(Report::from_outcome(outcome))
    }

    /// `shrink`, but with the trusted solver producing the assignment.
    #[pyo3(signature = (bug, solver, *, nm = 25, nc = 60, d_max = 16, a_max = 16, rng_seed = 0, depth_first = false))]
    #[allow(clippy::too_many_arguments)]
    fn shrink(
        &self,
        bug: &Script,
        solver: &Solver,
        nm: usize,
        nc: usize,
        d_max: u32,
        a_max: u32,
        rng_seed: u64,
        depth_first: bool,
    ) -> PyResult<Shrunk> {
        let cfg = fuzz_config(nm, nc, d_max, a_max, rng_seed, false);
        let assignment = self.assignment_for(&bug.inner, cfg.rng_seed)?;
        let mut eval = self.client.evaluator(&bug.inner, assignment);
        let r = minimize_rs(&bug.inner, &cfg, &mut eval, &solver.profile, depth_first)
            .map_err(to_py_err)?;
        Ok(Shrunk {
            original: (r.original.bytes, r.original.asserts, r.original.depth),
            minimized: (r.minimized.bytes, r.minimized.asserts, r.minimized.depth),
            fuzz_calls: r.fuzz_calls,
            reproducible: r.reproducible,
            script: r.script,
        })
    }
}

#[pymodule]
fn storm_forge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Script>()?;
    m.add_class::<Solver>()?;
    m.add_class::<Report>()?;
    m.add_class::<Shrunk>()?;
    m.add_class::<Oracle>()?;
    m.add_function(wrap_pyfunction!(parse, m)?)?;
    m.add_function(wrap_pyfunction!(valuate, m)?)?;
    m.add_function(wrap_pyfunction!(initial_pool, m)?)?;
    m.add_function(wrap_pyfunction!(mutants, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz, m)?)?;
    m.add_function(wrap_pyfunction!(shrink, m)?)?;
    Ok(())
}
