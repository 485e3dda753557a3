//! Client for the trusted assignment oracle: an external solver binary that
//! produces concrete variable assignments and decides predicate valuations
//! under them.
//!
//! Every query ships one SMT-LIB script over stdin. Multi-part queries are
//! packed into push/pop segments separated by echoed marker lines, so one
//! process spawn answers a whole batch. A wrong oracle model is harmless:
//! valuations only have to be consistent with each other, which they are
//! because they all come from the same assignment.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::runner::{self, InputMode, InstanceInput, SolverProfile, Verdict};
use crate::smtlib::ast::{Command, Constant, Script, Sort, Symbol, Term, TermKind};
use crate::smtlib::parser::{parse_term_scoped, FunKind, FunSig, SymbolTable};
use crate::smtlib::printer::{print_command, print_term};
use crate::smtlib::sexpr::{parse_sexprs, Atom, SExpr, SExprKind};
use crate::smtlib::subst::{strip_annotations, substitute_map};
use crate::util::splitmix64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TruthValue {
    True,
    False,
    Undetermined,
}

impl TruthValue {
    pub fn and(self, other: TruthValue) -> TruthValue {
        match (self, other) {
            (TruthValue::False, _) | (_, TruthValue::False) => TruthValue::False,
            (TruthValue::True, TruthValue::True) => TruthValue::True,
            _ => TruthValue::Undetermined,
        }
    }

    pub fn negate(self) -> TruthValue {
        match self {
            TruthValue::True => TruthValue::False,
            TruthValue::False => TruthValue::True,
            TruthValue::Undetermined => TruthValue::Undetermined,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            TruthValue::True => Some(true),
            TruthValue::False => Some(false),
            TruthValue::Undetermined => None,
        }
    }

    pub fn from_bool(b: bool) -> TruthValue {
        if b {
            TruthValue::True
        } else {
            TruthValue::False
        }
    }

    /// Three-valued disjunction.
    pub fn or(self, other: TruthValue) -> TruthValue {
        self.negate().and(other.negate()).negate()
    }
}

impl std::fmt::Display for TruthValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TruthValue::True => "TRUE",
            TruthValue::False => "FALSE",
            TruthValue::Undetermined => "UNDETERMINED",
        })
    }
}

/// Interpretation of one uninterpreted function in a model.
#[derive(Clone, Debug, PartialEq)]
pub struct FuncInterp {
    pub params: Vec<(Symbol, Sort)>,
    pub body: Term,
}

/// A total assignment for one seed script: a value for every declared
/// constant, an interpretation for every declared function, and a finite
/// universe for every uninterpreted sort.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub bindings: IndexMap<Symbol, Term>,
    pub fun_interps: IndexMap<Symbol, FuncInterp>,
    /// uninterpreted sort name -> its universe elements
    pub universes: IndexMap<Symbol, Vec<Symbol>>,
    pub oracle_id: String,
    pub rng_seed: u64,
}

/// Anything that can decide predicate truth under a fixed assignment.
pub trait PredicateEvaluator {
    fn evaluate_all(&mut self, preds: &[Term]) -> Result<Vec<TruthValue>>;

    fn evaluate(&mut self, pred: &Term) -> Result<TruthValue> {
        Ok(self
            .evaluate_all(std::slice::from_ref(pred))?
            .pop()
            .expect("one result per predicate"))
    }
}

#[derive(Clone, Debug)]
pub struct OracleClient {
    binary: PathBuf,
    id: String,
    query_timeout: Duration,
}

pub const ORACLE_ENV: &str = "STORM_ORACLE";

impl OracleClient {
    pub fn new(binary: PathBuf, query_timeout: Duration) -> Result<OracleClient> {
        if !binary.is_file() {
            return Err(Error::OracleUnavailable(format!(
                "oracle binary {} does not exist",
                binary.display()
            )));
        }
        let id = binary
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "oracle".to_string());
        Ok(OracleClient {
            binary,
            id,
            query_timeout,
        })
    }

    /// Resolve the oracle binary: the STORM_ORACLE environment variable
    /// always wins, then an explicitly configured path, then `storm-z3` on
    /// PATH.
    pub fn locate(explicit: Option<&Path>, query_timeout: Duration) -> Result<OracleClient> {
        if let Ok(p) = std::env::var(ORACLE_ENV) {
            return OracleClient::new(PathBuf::from(p), query_timeout);
        }
        if let Some(p) = explicit {
            return OracleClient::new(p.to_path_buf(), query_timeout);
        }
        if let Some(paths) = std::env::var_os("PATH") {
            for dir in std::env::split_paths(&paths) {
                let candidate = dir.join("storm-z3");
                if candidate.is_file() {
                    return OracleClient::new(candidate, query_timeout);
                }
            }
        }
        Err(Error::OracleUnavailable(format!(
            "no oracle solver found: set {ORACLE_ENV} or pass oracle.binary in the config"
        )))
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn binary(&self) -> &Path {
        &self.binary
    }

    fn invoke(&self, script: String, checks: usize) -> Result<runner::RawRun> {
        let hard = Duration::from_secs(5)
            + self.query_timeout.saturating_mul(checks.max(1) as u32);
        let profile = SolverProfile {
            id: self.id.clone(),
            binary: self.binary.clone(),
            args: vec![
                "-in".into(),
                format!("-t:{}", self.query_timeout.as_millis()),
            ],
            incremental: true,
            timeout: hard,
            memory_limit_mb: None,
            input_mode: InputMode::Pipe,
        };
        runner::execute(&profile, InstanceInput::Text(&script)).map_err(|e| match e {
            Error::Spawn { binary, message } => {
                Error::OracleUnavailable(format!("cannot spawn {binary}: {message}"))
            }
            other => other,
        })
    }

    /// Ask the oracle for a concrete assignment satisfying the script's
    /// assertions, or their negation when the assertions are unsatisfiable.
    /// A random probe cube goes first so that different rng seeds reach
    /// different corners of the solution space.
    pub fn generate_assignment(&self, s: &Script, rng_seed: u64) -> Result<Assignment> {
        let table = SymbolTable::from_script(s);
        let real_numerals = s
            .logic()
            .is_some_and(|l| crate::smtlib::parser::numerals_are_real(l.as_str()));
        let asserts: Vec<Term> = s.assertions().iter().map(|a| strip_annotations(a)).collect();

        if asserts.is_empty() {
            // the empty conjunction is true; no oracle needed
            let mut assignment = Assignment {
                bindings: IndexMap::new(),
                fun_interps: IndexMap::new(),
                universes: IndexMap::new(),
                oracle_id: self.id.clone(),
                rng_seed,
            };
            complete_assignment(&mut assignment, s, &table)?;
            return Ok(assignment);
        }

        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(rng_seed));
        let marker = format!("storm:{:016x}", splitmix64(rng_seed ^ 0xa55e55ed));

        let mut script = String::new();
        let _ = std::fmt::Write::write_fmt(
            &mut script,
            format_args!(
                "(set-option :smt.random_seed {})\n(set-option :sat.random_seed {})\n(set-option :smt.arith.random_initial_value true)\n",
                rng.random_range(0..=u16::MAX as u32),
                rng.random_range(0..=u16::MAX as u32),
            ),
        );
        for cmd in s.declarations() {
            if matches!(cmd, Command::DefineFun { .. }) {
                continue; // defined symbols are already inlined in asserts
            }
            print_command(&mut script, cmd);
            script.push('\n');
        }

        let mut shuffled = asserts.clone();
        shuffled.shuffle(&mut rng);
        let cube = probe_cube(s, &mut rng);

        let mut segments: Vec<Vec<String>> = Vec::new();
        if !cube.is_empty() {
            let mut seg: Vec<String> = shuffled.iter().map(assert_line).collect();
            seg.extend(cube.iter().map(assert_line));
            segments.push(seg);
        }
        segments.push(shuffled.iter().map(assert_line).collect());
        let negation = if asserts.len() == 1 {
            Term::not(asserts[0].clone())
        } else {
            Term::not(Term::simple_app(
                "and",
                asserts.clone(),
                Sort::bool_sort(),
            ))
        };
        segments.push(vec![assert_line(&negation)]);

        let checks = segments.len();
        for (k, seg) in segments.iter().enumerate() {
            let _ = std::fmt::Write::write_fmt(
                &mut script,
                format_args!("(echo \"{marker}:{k}\")\n(push 1)\n"),
            );
            for line in seg {
                script.push_str(line);
                script.push('\n');
            }
            script.push_str("(check-sat)\n(get-model)\n(pop 1)\n");
        }

        let raw = self.invoke(script, checks)?;
        let segments_out = split_segments(&raw.stdout, &marker);
        let mut verdicts = Vec::new();
        for seg in &segments_out {
            let (verdict, model) = scan_segment(seg);
            verdicts.push(verdict);
            if verdict == Some(Verdict::Sat) {
                let mut assignment =
                    parse_model(model.as_ref(), &table, real_numerals, &self.id, rng_seed);
                complete_assignment(&mut assignment, s, &table)?;
                return Ok(assignment);
            }
        }
        Err(Error::SeedRejected(format!(
            "oracle produced no model (segment verdicts: {})",
            verdicts
                .iter()
                .map(|v| v.map_or("none".to_string(), |v| v.to_string()))
                .collect::<Vec<_>>()
                .join(", ")
        )))
    }

    /// Build a batch evaluator for predicates of `s` under `m`.
    pub fn evaluator(&self, s: &Script, m: Assignment) -> OracleEvaluator<'_> {
        let mut preamble = String::new();
        for cmd in s.declarations() {
            if matches!(
                cmd,
                Command::DeclareSort { .. } | Command::DeclareDatatypes(_)
            ) {
                print_command(&mut preamble, cmd);
                preamble.push('\n');
            }
        }
        for (sort_name, elems) in &m.universes {
            for e in elems {
                let _ = std::fmt::Write::write_fmt(
                    &mut preamble,
                    format_args!("(declare-fun {e} () {sort_name})\n"),
                );
            }
            if elems.len() >= 2 {
                let names: Vec<String> = elems.iter().map(|e| e.to_string()).collect();
                let _ = std::fmt::Write::write_fmt(
                    &mut preamble,
                    format_args!("(assert (distinct {}))\n", names.join(" ")),
                );
            }
            // close the universe, so quantifiers over it are decidable
            let eqs: Vec<String> = elems
                .iter()
                .map(|e| format!("(= storm!x {e})"))
                .collect();
            let body = if eqs.len() == 1 {
                eqs[0].clone()
            } else {
                format!("(or {})", eqs.join(" "))
            };
            let _ = std::fmt::Write::write_fmt(
                &mut preamble,
                format_args!("(assert (forall ((storm!x {sort_name})) {body}))\n"),
            );
        }
        OracleEvaluator {
            client: self,
            preamble,
            assignment: m,
            cache: HashMap::new(),
        }
    }

    /// Second opinion on a finished instance; test and triage use only.
    pub fn check_ground_truth(&self, instance_text: &str) -> Result<Verdict> {
        let checks = instance_text.matches("(check-sat").count().max(1);
        let raw = self.invoke(instance_text.to_string(), checks)?;
        Ok(runner::interpret(&raw).verdict)
    }
}

fn assert_line(t: &Term) -> String {
    format!("(assert {})", print_term(t))
}

/// Up to four random sign/bound constraints over declared constants. The
/// cube segment narrows the model search to a random corner; when it is
/// unsatisfiable the plain segment still yields a model.
fn probe_cube(s: &Script, rng: &mut ChaCha8Rng) -> Vec<Term> {
    let mut candidates: Vec<(Symbol, Sort)> = Vec::new();
    for cmd in s.declarations() {
        if let Command::DeclareConst { name, sort } = cmd {
            if sort.is_bool()
                || sort.is_int()
                || sort.is_real()
                || sort.bitvec_width().is_some()
            {
                candidates.push((name.clone(), sort.clone()));
            }
        }
    }
    candidates.shuffle(rng);
    candidates
        .into_iter()
        .take(4)
        .map(|(name, sort)| {
            let v = Term::var(name, sort.clone());
            if sort.is_bool() {
                if rng.random::<bool>() {
                    v
                } else {
                    Term::not(v)
                }
            } else if sort.is_int() {
                let k: i64 = rng.random_range(-64..=64);
                let op = if rng.random::<bool>() { "<=" } else { ">=" };
                Term::simple_app(op, vec![v, int_term(k)], Sort::bool_sort())
            } else if sort.is_real() {
                let k: i64 = rng.random_range(-64..=64);
                let op = if rng.random::<bool>() { "<=" } else { ">=" };
                Term::simple_app(op, vec![v, real_term(k)], Sort::bool_sort())
            } else {
                let w = sort.bitvec_width().expect("filtered to bitvectors");
                let max = if w >= 8 { 255 } else { (1u64 << w) - 1 };
                let k = rng.random_range(0..=max);
                let op = if rng.random::<bool>() { "bvule" } else { "bvuge" };
                let bound = Term::constant(
                    Constant::BvNum {
                        value: k.to_string(),
                        width: w,
                    },
                    sort.clone(),
                );
                Term::simple_app(op, vec![v, bound], Sort::bool_sort())
            }
        })
        .collect()
}

fn int_term(k: i64) -> Term {
    if k < 0 {
        Term::simple_app(
            "-",
            vec![Term::constant(
                Constant::Numeral(k.unsigned_abs().to_string()),
                Sort::int(),
            )],
            Sort::int(),
        )
    } else {
        Term::constant(Constant::Numeral(k.to_string()), Sort::int())
    }
}

fn real_term(k: i64) -> Term {
    let mag = Term::constant(
        Constant::Decimal(format!("{}.0", k.unsigned_abs())),
        Sort::real(),
    );
    if k < 0 {
        Term::simple_app("-", vec![mag], Sort::real())
    } else {
        mag
    }
}

/// Break oracle stdout into the per-segment chunks delimited by echoed
/// marker lines.
fn split_segments(stdout: &str, marker: &str) -> Vec<String> {
    let mut segments = Vec::new();
    let mut current: Option<String> = None;
    for line in stdout.lines() {
        if line.trim().starts_with(marker) {
            if let Some(done) = current.take() {
                segments.push(done);
            }
            current = Some(String::new());
        } else if let Some(cur) = current.as_mut() {
            cur.push_str(line);
            cur.push('\n');
        }
    }
    if let Some(done) = current {
        segments.push(done);
    }
    segments
}

/// First verdict token and the first s-expression group after it (the
/// model); (error ...) groups are skipped.
fn scan_segment(segment: &str) -> (Option<Verdict>, Option<SExpr>) {
    let Ok(items) = parse_sexprs(segment) else {
        return (None, None);
    };
    let mut verdict = None;
    for item in items {
        match &item.kind {
            SExprKind::Atom(Atom::Sym(s)) if verdict.is_none() => {
                verdict = match s.as_str() {
                    "sat" => Some(Verdict::Sat),
                    "unsat" => Some(Verdict::Unsat),
                    "unknown" => Some(Verdict::Unknown),
                    _ => None,
                };
            }
            SExprKind::List(_) if verdict.is_some() => {
                if item.head() != Some("error") {
                    return (verdict, Some(item));
                }
            }
            _ => {}
        }
    }
    (verdict, None)
}

enum RawItem {
    Const {
        name: Symbol,
        value: SExpr,
    },
    Fun {
        name: Symbol,
        params: Vec<(Symbol, Sort)>,
        value: SExpr,
    },
}

/// Read a (get-model) s-expression into an assignment. Unparseable or
/// missing entries fall back to sort defaults later; a degraded model only
/// costs assignment diversity, never consistency.
fn parse_model(
    model: Option<&SExpr>,
    table: &SymbolTable,
    real_numerals: bool,
    oracle_id: &str,
    rng_seed: u64,
) -> Assignment {
    let mut assignment = Assignment {
        bindings: IndexMap::new(),
        fun_interps: IndexMap::new(),
        universes: IndexMap::new(),
        oracle_id: oracle_id.to_string(),
        rng_seed,
    };
    let Some(model) = model else {
        return assignment;
    };
    let Some(items) = model.as_list() else {
        return assignment;
    };

    let mut scratch = table.clone();
    let mut pending: Vec<RawItem> = Vec::new();

    // first pass: universe elements (declare-fun) plus the raw define-funs;
    // bare cardinality constraints and anything else are skipped
    for item in items {
        let Some(parts) = item.as_list() else { continue };
        match parts.first().and_then(|h| h.as_sym()) {
            Some("declare-fun") => {
                let (Some(name), Some(params), Some(ret)) =
                    (parts.get(1), parts.get(2), parts.get(3))
                else {
                    continue;
                };
                let Some(name) = name.as_sym() else { continue };
                if !params.as_list().map(|l| l.is_empty()).unwrap_or(false) {
                    continue;
                }
                let Some(ret) = ret.as_sym() else { continue };
                let sort_name = Symbol::new(ret);
                let sort = Sort::simple(sort_name.clone());
                if !scratch.is_uninterpreted_sort(&sort) {
                    continue;
                }
                let elem = Symbol::new(name);
                scratch.funs.insert(
                    elem.clone(),
                    FunSig {
                        params: Vec::new(),
                        ret: sort,
                        kind: FunKind::Declared,
                    },
                );
                assignment
                    .universes
                    .entry(sort_name)
                    .or_default()
                    .push(elem);
            }
            Some("define-fun") => {
                let (Some(name), Some(params), Some(_ret), Some(value)) =
                    (parts.get(1), parts.get(2), parts.get(3), parts.get(4))
                else {
                    continue;
                };
                let Some(name) = name.as_sym() else { continue };
                let Some(param_list) = params.as_list() else { continue };
                let mut parsed_params = Vec::new();
                let mut bad = false;
                for p in param_list {
                    match p.as_list() {
                        Some([pname, psort]) => {
                            let (Some(pname), Ok(psort)) = (
                                pname.as_sym(),
                                sort_of_sexpr(psort, &scratch),
                            ) else {
                                bad = true;
                                break;
                            };
                            parsed_params.push((Symbol::new(pname), psort));
                        }
                        _ => {
                            bad = true;
                            break;
                        }
                    }
                }
                if bad {
                    continue;
                }
                if parsed_params.is_empty() {
                    pending.push(RawItem::Const {
                        name: Symbol::new(name),
                        value: value.clone(),
                    });
                } else {
                    pending.push(RawItem::Fun {
                        name: Symbol::new(name),
                        params: parsed_params,
                        value: value.clone(),
                    });
                }
            }
            _ => {}
        }
    }

    // multi-pass resolution: model entries may reference helper symbols
    // defined later in the list (z3's k!N style); parse what resolves,
    // register it, retry the rest until a fixpoint
    let mut as_arrays: Vec<(Symbol, Symbol)> = Vec::new(); // const -> backing fun
    loop {
        let mut progressed = false;
        let mut still_pending = Vec::new();
        for item in pending {
            match &item {
                RawItem::Const { name, value } => {
                    if let Some(backing) = as_array_target(value) {
                        as_arrays.push((name.clone(), backing));
                        progressed = true;
                        continue;
                    }
                    match parse_term_scoped(&scratch, real_numerals, value, &[]) {
                        Ok(t) => {
                            record_const(&mut assignment, &mut scratch, table, name, t);
                            progressed = true;
                        }
                        Err(_) => still_pending.push(item),
                    }
                }
                RawItem::Fun {
                    name,
                    params,
                    value,
                } => match parse_term_scoped(&scratch, real_numerals, value, params) {
                    Ok(t) => {
                        record_fun(
                            &mut assignment,
                            &mut scratch,
                            table,
                            name,
                            params.clone(),
                            t,
                        );
                        progressed = true;
                    }
                    Err(_) => still_pending.push(item),
                },
            }
        }
        pending = still_pending;
        if pending.is_empty() || !progressed {
            break;
        }
    }

    // resolve (_ as-array f) constants against the interpretations we got
    for (name, backing) in as_arrays {
        let Some(FunSig {
            ret: array_sort,
            kind: FunKind::Declared,
            ..
        }) = table.funs.get(&name).cloned()
        else {
            continue;
        };
        let interp = assignment
            .fun_interps
            .get(&backing)
            .cloned()
            .or_else(|| aux_interp(&scratch, &backing));
        if let Some(interp) = interp {
            if let Some(value) = interp_to_array(&interp, &array_sort) {
                assignment.bindings.insert(name, value);
            }
        }
    }

    assignment
}

fn sort_of_sexpr(sx: &SExpr, table: &SymbolTable) -> Result<Sort> {
    // sorts in model output are parsed with the same rules as scripts
    match &sx.kind {
        SExprKind::Atom(Atom::Sym(s)) => match s.as_str() {
            "Bool" => Ok(Sort::bool_sort()),
            "Int" => Ok(Sort::int()),
            "Real" => Ok(Sort::real()),
            "String" => Ok(Sort::string()),
            "RegLan" => Ok(Sort::reglan()),
            name => {
                let sym = Symbol::new(name);
                if table.sorts.contains_key(&sym) {
                    Ok(Sort::simple(sym))
                } else if let Some(alias) = table.sort_aliases.get(&sym) {
                    Ok(alias.clone())
                } else {
                    Err(sx.error(format!("unknown sort `{name}`")))
                }
            }
        },
        _ => {
            let items = sx.as_list().ok_or_else(|| sx.error("expected a sort"))?;
            match items.first().and_then(|h| h.as_sym()) {
                Some("_") => {
                    let width = items
                        .get(2)
                        .and_then(|a| a.as_atom())
                        .and_then(|a| match a {
                            Atom::Num(n) => n.parse::<u64>().ok(),
                            _ => None,
                        })
                        .ok_or_else(|| sx.error("expected (_ BitVec n)"))?;
                    Ok(Sort::bitvec(width))
                }
                Some("Array") if items.len() == 3 => Ok(Sort::array(
                    sort_of_sexpr(&items[1], table)?,
                    sort_of_sexpr(&items[2], table)?,
                )),
                _ => Err(sx.error("unsupported sort in model")),
            }
        }
    }
}

fn record_const(
    assignment: &mut Assignment,
    scratch: &mut SymbolTable,
    table: &SymbolTable,
    name: &Symbol,
    value: Term,
) {
    if let Some(sig) = table.funs.get(name) {
        if sig.params.is_empty()
            && matches!(sig.kind, FunKind::Declared)
            && *value.sort() == sig.ret
        {
            assignment.bindings.insert(name.clone(), value.clone());
        }
    }
    // register for later references either way (helper symbols included)
    scratch.funs.insert(
        name.clone(),
        FunSig {
            params: Vec::new(),
            ret: value.sort().clone(),
            kind: FunKind::Defined {
                params: Vec::new(),
                body: value,
            },
        },
    );
}

fn record_fun(
    assignment: &mut Assignment,
    scratch: &mut SymbolTable,
    table: &SymbolTable,
    name: &Symbol,
    params: Vec<(Symbol, Sort)>,
    body: Term,
) {
    if let Some(sig) = table.funs.get(name) {
        let param_sorts: Vec<Sort> = params.iter().map(|(_, s)| s.clone()).collect();
        if matches!(sig.kind, FunKind::Declared)
            && sig.params == param_sorts
            && *body.sort() == sig.ret
        {
            assignment.fun_interps.insert(
                name.clone(),
                FuncInterp {
                    params: params.clone(),
                    body: body.clone(),
                },
            );
        }
    }
    scratch.funs.insert(
        name.clone(),
        FunSig {
            params: params.iter().map(|(_, s)| s.clone()).collect(),
            ret: body.sort().clone(),
            kind: FunKind::Defined { params, body },
        },
    );
}

fn aux_interp(scratch: &SymbolTable, name: &Symbol) -> Option<FuncInterp> {
    match scratch.funs.get(name) {
        Some(FunSig {
            kind: FunKind::Defined { params, body },
            ..
        }) if !params.is_empty() => Some(FuncInterp {
            params: params.clone(),
            body: body.clone(),
        }),
        _ => None,
    }
}

fn as_array_target(value: &SExpr) -> Option<Symbol> {
    let items = value.as_list()?;
    match items {
        [underscore, kw, f] => {
            if underscore.as_sym() == Some("_") && kw.as_sym() == Some("as-array") {
                f.as_sym().map(Symbol::new)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Convert a unary function interpretation shaped as an ite chain over
/// equality tests into an equivalent store chain.
fn interp_to_array(interp: &FuncInterp, array_sort: &Sort) -> Option<Term> {
    let (index_sort, elem_sort) = array_sort.array_sorts()?;
    let [(param, param_sort)] = interp.params.as_slice() else {
        return None;
    };
    if param_sort != index_sort {
        return None;
    }
    let mut pairs: Vec<(Term, Term)> = Vec::new();
    let mut cursor = interp.body.clone();
    loop {
        match cursor.kind() {
            TermKind::App { op, args, .. } if op.as_str() == "ite" && args.len() == 3 => {
                let key = ite_eq_key(&args[0], param)?;
                pairs.push((key, args[1].clone()));
                cursor = args[2].clone();
            }
            _ => break,
        }
    }
    if cursor.free_symbols().contains(param) {
        return None; // not a plain lookup table
    }
    if *cursor.sort() != *elem_sort {
        return None;
    }
    let mut array = Term::app(
        "const",
        Vec::new(),
        Some(array_sort.clone()),
        vec![cursor],
        array_sort.clone(),
    );
    // the first ite branch wins on overlap, so it must become the
    // outermost store
    for (key, value) in pairs.into_iter().rev() {
        array = Term::simple_app(
            "store",
            vec![array, key, value],
            array_sort.clone(),
        );
    }
    Some(array)
}

fn ite_eq_key(cond: &Term, param: &Symbol) -> Option<Term> {
    let TermKind::App { op, args, .. } = cond.kind() else {
        return None;
    };
    if op.as_str() != "=" || args.len() != 2 {
        return None;
    }
    let is_param = |t: &Term| matches!(t.kind(), TermKind::Var(v) if v == param);
    if is_param(&args[0]) && !args[1].free_symbols().contains(param) {
        Some(args[1].clone())
    } else if is_param(&args[1]) && !args[0].free_symbols().contains(param) {
        Some(args[0].clone())
    } else {
        None
    }
}

/// Fill in whatever the oracle's model left out, in declaration order:
/// sort-default values for constants, constant-default interpretations for
/// functions, singleton universes for untouched uninterpreted sorts.
fn complete_assignment(
    assignment: &mut Assignment,
    s: &Script,
    table: &SymbolTable,
) -> Result<()> {
    for cmd in s.declarations() {
        match cmd {
            Command::DeclareSort { name, arity: 0 } => {
                ensure_universe(&mut assignment.universes, name);
            }
            Command::DeclareConst { name, sort } => {
                if !assignment.bindings.contains_key(name) {
                    let v = default_value(sort, &mut assignment.universes, table)?;
                    assignment.bindings.insert(name.clone(), v);
                }
            }
            Command::DeclareFun { name, params, ret } => {
                if params.is_empty() {
                    if !assignment.bindings.contains_key(name) {
                        let v = default_value(ret, &mut assignment.universes, table)?;
                        assignment.bindings.insert(name.clone(), v);
                    }
                } else if !assignment.fun_interps.contains_key(name) {
                    let body = default_value(ret, &mut assignment.universes, table)?;
                    let params = params
                        .iter()
                        .enumerate()
                        .map(|(i, s)| (Symbol::new(format!("storm!p{i}")), s.clone()))
                        .collect();
                    assignment
                        .fun_interps
                        .insert(name.clone(), FuncInterp { params, body });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

fn ensure_universe<'u>(
    universes: &'u mut IndexMap<Symbol, Vec<Symbol>>,
    sort_name: &Symbol,
) -> &'u Vec<Symbol> {
    universes.entry(sort_name.clone()).or_insert_with(|| {
        vec![Symbol::new(format!("{sort_name}!storm!0"))]
    })
}

/// Deterministic default inhabitant of a sort.
pub fn default_value(
    sort: &Sort,
    universes: &mut IndexMap<Symbol, Vec<Symbol>>,
    table: &SymbolTable,
) -> Result<Term> {
    default_value_inner(sort, universes, table, &mut Vec::new())
}

fn default_value_inner(
    sort: &Sort,
    universes: &mut IndexMap<Symbol, Vec<Symbol>>,
    table: &SymbolTable,
    visiting: &mut Vec<Symbol>,
) -> Result<Term> {
    if sort.is_bool() {
        return Ok(Term::bool_const(false));
    }
    if sort.is_int() {
        return Ok(Term::constant(Constant::Numeral("0".into()), Sort::int()));
    }
    if sort.is_real() {
        return Ok(Term::constant(Constant::Decimal("0.0".into()), Sort::real()));
    }
    if sort.is_string() {
        return Ok(Term::constant(Constant::Str(String::new()), Sort::string()));
    }
    if let Some(w) = sort.bitvec_width() {
        return Ok(Term::constant(
            Constant::BvNum {
                value: "0".into(),
                width: w,
            },
            sort.clone(),
        ));
    }
    if let Some((_, elem)) = sort.array_sorts() {
        let inner = default_value_inner(elem, universes, table, visiting)?;
        return Ok(Term::app(
            "const",
            Vec::new(),
            Some(sort.clone()),
            vec![inner],
            sort.clone(),
        ));
    }
    if let Some(ctors) = table.datatypes.get(&sort.name).cloned() {
        if visiting.contains(&sort.name) {
            return Err(Error::Unsupported(format!(
                "cannot build a default value for recursive datatype {}",
                sort.name
            )));
        }
        visiting.push(sort.name.clone());
        // prefer a nullary constructor so recursion terminates
        let ctor = ctors
            .iter()
            .find(|c| c.selectors.is_empty())
            .or_else(|| ctors.first())
            .ok_or_else(|| {
                Error::Unsupported(format!("datatype {} has no constructors", sort.name))
            })?;
        let mut args = Vec::new();
        for (_, sel_sort) in &ctor.selectors {
            args.push(default_value_inner(sel_sort, universes, table, visiting)?);
        }
        visiting.pop();
        return Ok(if args.is_empty() {
            Term::var(ctor.name.clone(), sort.clone())
        } else {
            Term::simple_app(ctor.name.clone(), args, sort.clone())
        });
    }
    if table.is_uninterpreted_sort(sort) {
        let elems = ensure_universe(universes, &sort.name);
        return Ok(Term::var(elems[0].clone(), sort.clone()));
    }
    Err(Error::Unsupported(format!(
        "no default value for sort {}",
        crate::smtlib::printer::print_sort(sort)
    )))
}

/// Substitute an assignment into a term: constants become their values and
/// applications of interpreted functions beta-reduce, bottom-up.
pub fn apply_model(t: &Term, m: &Assignment) -> Term {
    let mut shadowed = Vec::new();
    apply_model_inner(t, m, &mut shadowed)
}

fn apply_model_inner(t: &Term, m: &Assignment, shadowed: &mut Vec<Symbol>) -> Term {
    match t.kind() {
        TermKind::Const(_) => t.clone(),
        TermKind::Var(name) => {
            if !shadowed.contains(name) {
                if let Some(v) = m.bindings.get(name) {
                    return v.clone();
                }
            }
            t.clone()
        }
        TermKind::App {
            op,
            indices,
            qual,
            args,
        } => {
            let new_args: Vec<Term> = args
                .iter()
                .map(|a| apply_model_inner(a, m, shadowed))
                .collect();
            if indices.is_empty() && qual.is_none() {
                if let Some(interp) = m.fun_interps.get(op) {
                    let map: HashMap<Symbol, Term> = interp
                        .params
                        .iter()
                        .map(|(p, _)| p.clone())
                        .zip(new_args.iter().cloned())
                        .collect();
                    return substitute_map(&interp.body, &map);
                }
            }
            Term::app(
                op.clone(),
                indices.clone(),
                qual.clone(),
                new_args,
                t.sort().clone(),
            )
        }
        TermKind::Quant {
            binder,
            bound,
            body,
        } => {
            let depth = shadowed.len();
            shadowed.extend(bound.iter().map(|(n, _)| n.clone()));
            let new_body = apply_model_inner(body, m, shadowed);
            shadowed.truncate(depth);
            Term::quant(*binder, bound.clone(), new_body)
        }
        TermKind::Let { bindings, body } => {
            let new_bindings: Vec<(Symbol, Term)> = bindings
                .iter()
                .map(|(n, v)| (n.clone(), apply_model_inner(v, m, shadowed)))
                .collect();
            let depth = shadowed.len();
            shadowed.extend(bindings.iter().map(|(n, _)| n.clone()));
            let new_body = apply_model_inner(body, m, shadowed);
            shadowed.truncate(depth);
            Term::let_(new_bindings, new_body)
        }
        TermKind::Annot { body, .. } => apply_model_inner(body, m, shadowed),
    }
}

/// Batch evaluator backed by the oracle process, with memoization so
/// repeated pool builds (minimization re-runs) never re-ask a valuation.
pub struct OracleEvaluator<'a> {
    client: &'a OracleClient,
    preamble: String,
    assignment: Assignment,
    cache: HashMap<Term, TruthValue>,
}

impl OracleEvaluator<'_> {
    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }
}

impl PredicateEvaluator for OracleEvaluator<'_> {
    fn evaluate_all(&mut self, preds: &[Term]) -> Result<Vec<TruthValue>> {
        let mut results: Vec<Option<TruthValue>> = preds
            .iter()
            .map(|p| self.cache.get(p).copied())
            .collect();
        let todo: Vec<usize> = (0..preds.len()).filter(|&i| results[i].is_none()).collect();
        if !todo.is_empty() {
            let marker = format!("storm:eval:{:08x}", todo.len());
            let mut script = self.preamble.clone();
            for (k, &i) in todo.iter().enumerate() {
                let ground = apply_model(&preds[i], &self.assignment);
                let _ = std::fmt::Write::write_fmt(
                    &mut script,
                    format_args!(
                        "(echo \"{marker}:{k}\")\n(push 1)\n(assert {})\n(check-sat)\n(pop 1)\n",
                        print_term(&ground)
                    ),
                );
            }
            let raw = self.client.invoke(script, todo.len())?;
            let segments = split_segments(&raw.stdout, &marker);
            for (k, &i) in todo.iter().enumerate() {
                let verdict = segments.get(k).map(|s| scan_segment(s).0);
                let value = match verdict {
                    Some(Some(Verdict::Sat)) => TruthValue::True,
                    Some(Some(Verdict::Unsat)) => TruthValue::False,
                    _ => TruthValue::Undetermined,
                };
                // undetermined verdicts are not cached: a later, less
                // loaded batch may still decide them
                if value != TruthValue::Undetermined {
                    self.cache.insert(preds[i].clone(), value);
                }
                results[i] = Some(value);
            }
        }
        Ok(results.into_iter().map(|r| r.expect("filled above")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smtlib::parse_script;

    fn oracle() -> OracleClient {
        let path = std::env::var(ORACLE_ENV).unwrap_or_else(|_| {
            concat!(env!("CARGO_MANIFEST_DIR"), "/../../tools/z3-oracle/target/release/storm-z3")
                .to_string()
        });
        OracleClient::new(PathBuf::from(path), Duration::from_secs(10)).expect(
            "oracle binary missing; build it with \
             `cargo build --release` in tools/z3-oracle",
        )
    }

    #[test]
    fn truth_value_algebra() {
        use TruthValue::*;
        assert_eq!(True.and(True), True);
        assert_eq!(True.and(False), False);
        assert_eq!(False.and(Undetermined), False);
        assert_eq!(True.and(Undetermined), Undetermined);
        assert_eq!(True.negate(), False);
        assert_eq!(Undetermined.negate(), Undetermined);
    }

    #[test]
    fn assignment_satisfies_the_assertions() {
        let s = parse_script(
            "(set-logic QF_LIA)(declare-const x Int)(declare-const y Int)\
             (assert (> x 3))(assert (< y (- 2)))(check-sat)",
        )
        .unwrap();
        let client = oracle();
        let m = client.generate_assignment(&s, 42).unwrap();
        assert_eq!(m.bindings.len(), 2);
        let mut eval = client.evaluator(&s, m);
        let conj = Term::and(s.assertions()[0].clone(), s.assertions()[1].clone());
        assert_eq!(eval.evaluate(&conj).unwrap(), TruthValue::True);
    }

    #[test]
    fn contradiction_takes_the_negation_path() {
        let s = parse_script(
            "(declare-const a Bool)(assert a)(assert (not a))(check-sat)",
        )
        .unwrap();
        let m = oracle().generate_assignment(&s, 7).unwrap();
        assert!(m.bindings.contains_key(&Symbol::new("a")));
    }

    #[test]
    fn empty_script_gets_sort_defaults() {
        let s = parse_script(
            "(declare-const p Bool)(declare-const n Int)(declare-const v (_ BitVec 4))\
             (declare-const t String)(declare-const r Real)(check-sat)",
        )
        .unwrap();
        let m = oracle().generate_assignment(&s, 1).unwrap();
        let get = |n: &str| print_term(&m.bindings[&Symbol::new(n)]);
        assert_eq!(get("p"), "false");
        assert_eq!(get("n"), "0");
        assert_eq!(get("v"), "(_ bv0 4)");
        assert_eq!(get("t"), "\"\"");
        assert_eq!(get("r"), "0.0");
    }

    #[test]
    fn identical_seeds_identical_assignments() {
        let s = parse_script(
            "(declare-const x Int)(declare-const y Int)(assert (> (+ x y) 10))(check-sat)",
        )
        .unwrap();
        let client = oracle();
        let a = client.generate_assignment(&s, 99).unwrap();
        let b = client.generate_assignment(&s, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn evaluate_boolean_and_ground_arithmetic() {
        let s = parse_script(
            "(declare-const a Bool)(declare-const b Bool)(assert (or a b))(check-sat)",
        )
        .unwrap();
        let client = oracle();
        let mut m = client.generate_assignment(&s, 5).unwrap();
        m.bindings
            .insert(Symbol::new("a"), Term::bool_const(false));
        m.bindings.insert(Symbol::new("b"), Term::bool_const(true));
        let mut eval = client.evaluator(&s, m);
        assert_eq!(
            eval.evaluate(s.assertions()[0]).unwrap(),
            TruthValue::True
        );
        let ground = parse_script(
            "(declare-const z Int)(assert (and (> 5 3) (not (> 2 3))))(check-sat)",
        )
        .unwrap();
        assert_eq!(
            eval.evaluate(ground.assertions()[0]).unwrap(),
            TruthValue::True
        );
    }

    #[test]
    fn uninterpreted_sorts_get_closed_universes() {
        let s = parse_script(
            "(set-logic QF_UF)(declare-sort S 0)(declare-const a S)(declare-const b S)\
             (declare-fun f (S) S)(assert (distinct a b))(assert (= (f a) b))(check-sat)",
        )
        .unwrap();
        let client = oracle();
        let m = client.generate_assignment(&s, 3).unwrap();
        assert!(m.universes[&Symbol::new("S")].len() >= 2);
        assert!(m.fun_interps.contains_key(&Symbol::new("f")));
        let mut eval = client.evaluator(&s, m);
        let distinct = s.assertions()[0];
        let feq = s.assertions()[1];
        assert_eq!(eval.evaluate(distinct).unwrap(), TruthValue::True);
        assert_eq!(eval.evaluate(feq).unwrap(), TruthValue::True);
        assert_eq!(
            eval.evaluate(&Term::not(distinct.clone())).unwrap(),
            TruthValue::False
        );
    }

    #[test]
    fn quantified_predicates_evaluate_exactly() {
        let s = parse_script(
            "(declare-sort S 0)(declare-fun g (S) S)(declare-const c S)\
             (assert (forall ((x S)) (= (g x) c)))(check-sat)",
        )
        .unwrap();
        let client = oracle();
        let m = client.generate_assignment(&s, 11).unwrap();
        let mut eval = client.evaluator(&s, m);
        let v = eval.evaluate(s.assertions()[0]).unwrap();
        assert_eq!(v, TruthValue::True);
    }

    #[test]
    fn array_models_become_store_chains() {
        let s = parse_script(
            "(declare-const a (Array Int Int))(assert (= (select a 1) 5))\
             (assert (= (select a 2) 7))(check-sat)",
        )
        .unwrap();
        let client = oracle();
        let m = client.generate_assignment(&s, 13).unwrap();
        let mut eval = client.evaluator(&s, m);
        assert_eq!(
            eval.evaluate(s.assertions()[0]).unwrap(),
            TruthValue::True
        );
        assert_eq!(
            eval.evaluate(s.assertions()[1]).unwrap(),
            TruthValue::True
        );
    }

    #[test]
    fn check_ground_truth_answers_plainly() {
        let client = oracle();
        assert_eq!(
            client
                .check_ground_truth("(assert true)(check-sat)")
                .unwrap(),
            Verdict::Sat
        );
        assert_eq!(
            client
                .check_ground_truth("(assert false)(check-sat)")
                .unwrap(),
            Verdict::Unsat
        );
    }

    #[test]
    fn missing_oracle_is_reported() {
        let err =
            OracleClient::new(PathBuf::from("/no/such/solver"), Duration::from_secs(1))
                .unwrap_err();
        assert!(matches!(err, Error::OracleUnavailable(_)));
    }

    #[test]
    fn interp_to_array_orders_stores_correctly() {
        // f(x) = if x=1 then 10 else if x=1 then 99 else 0; first branch
        // wins, so the store for 1->10 must be outermost
        let one = Term::constant(Constant::Numeral("1".into()), Sort::int());
        let param = Symbol::new("x!0");
        let x = Term::var(param.clone(), Sort::int());
        let eq = |k: &Term| {
            Term::simple_app("=", vec![x.clone(), k.clone()], Sort::bool_sort())
        };
        let n = |v: &str| Term::constant(Constant::Numeral(v.into()), Sort::int());
        let inner_ite = Term::simple_app(
            "ite",
            vec![eq(&one), n("99"), n("0")],
            Sort::int(),
        );
        let body = Term::simple_app("ite", vec![eq(&one), n("10"), inner_ite], Sort::int());
        let interp = FuncInterp {
            params: vec![(param, Sort::int())],
            body,
        };
        let arr = interp_to_array(&interp, &Sort::array(Sort::int(), Sort::int())).unwrap();
        assert_eq!(
            print_term(&arr),
            "(store (store ((as const (Array Int Int)) 0) 1 99) 1 10)"
        );
    }
}
