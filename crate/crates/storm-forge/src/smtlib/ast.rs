//! Terms, sorts, and scripts. Terms are immutable, reference-counted, and
//! carry their depth and a structural hash computed at construction, so the
//! hot paths (pool dedup, depth bounds) never walk the tree twice.

use std::collections::HashSet;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::Deref;
use std::sync::Arc;

use crate::util::fnv1a;

/// Interned-ish identifier. Cheap to clone, compared by content.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(s: impl AsRef<str>) -> Self {
        Symbol(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Deref for Symbol {
    type Target = str;
    fn deref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

impl From<String> for Symbol {
    fn from(s: String) -> Self {
        Symbol(Arc::from(s))
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum SortArg {
    Sort(Sort),
    /// numeral index, e.g. the width in (_ BitVec 8); strictly positive
    Num(u64),
}

/// Structural sort: a head symbol plus sort or numeral arguments.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Sort {
    pub name: Symbol,
    pub args: Vec<SortArg>,
}

impl Sort {
    pub fn simple(name: impl Into<Symbol>) -> Self {
        Sort {
            name: name.into(),
            args: Vec::new(),
        }
    }

    pub fn bool_sort() -> Self {
        Sort::simple("Bool")
    }

    pub fn int() -> Self {
        Sort::simple("Int")
    }

    pub fn real() -> Self {
        Sort::simple("Real")
    }

    pub fn string() -> Self {
        Sort::simple("String")
    }

    pub fn reglan() -> Self {
        Sort::simple("RegLan")
    }

    pub fn bitvec(width: u64) -> Self {
        assert!(width > 0, "bitvector width must be strictly positive");
        Sort {
            name: Symbol::new("BitVec"),
            args: vec![SortArg::Num(width)],
        }
    }

    pub fn array(index: Sort, element: Sort) -> Self {
        Sort {
            name: Symbol::new("Array"),
            args: vec![SortArg::Sort(index), SortArg::Sort(element)],
        }
    }

    pub fn is_bool(&self) -> bool {
        self.args.is_empty() && self.name.as_str() == "Bool"
    }

    pub fn is_int(&self) -> bool {
        self.args.is_empty() && self.name.as_str() == "Int"
    }

    pub fn is_real(&self) -> bool {
        self.args.is_empty() && self.name.as_str() == "Real"
    }

    pub fn is_string(&self) -> bool {
        self.args.is_empty() && self.name.as_str() == "String"
    }

    pub fn bitvec_width(&self) -> Option<u64> {
        if self.name.as_str() == "BitVec" {
            if let [SortArg::Num(w)] = self.args.as_slice() {
                return Some(*w);
            }
        }
        None
    }

    pub fn array_sorts(&self) -> Option<(&Sort, &Sort)> {
        if self.name.as_str() == "Array" {
            if let [SortArg::Sort(a), SortArg::Sort(b)] = self.args.as_slice() {
                return Some((a, b));
            }
        }
        None
    }

    fn feed_hash(&self, h: &mut u64) {
        mix(h, fnv1a(self.name.as_bytes()));
        for a in &self.args {
            match a {
                SortArg::Num(n) => mix(h, 0x9_0001 ^ n),
                SortArg::Sort(s) => s.feed_hash(h),
            }
        }
    }
}

/// Literal constants. Numeric literals keep their canonical source text:
/// the fuzzer recombines Boolean structure and never computes on leaves, so
/// text is the lossless representation.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Constant {
    Bool(bool),
    /// decimal digits, e.g. "42"
    Numeral(String),
    /// e.g. "1.5"
    Decimal(String),
    /// lowercased hex digits without the #x prefix; width = 4 * len
    Hex(String),
    /// binary digits without the #b prefix; width = len
    Bin(String),
    /// decoded string contents (no surrounding quotes, "" already collapsed)
    Str(String),
    /// (_ bvN w) form kept distinct from #x/#b so scripts reprint verbatim
    BvNum { value: String, width: u64 },
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Index {
    Num(u64),
    Sym(Symbol),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Binder {
    Forall,
    Exists,
}

/// Attribute on an annotation term, e.g. `:named foo` or `:pattern (...)`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Attribute {
    pub key: String,
    pub value: Option<super::sexpr::SExpr>,
}

#[derive(Clone, Debug)]
pub enum TermKind {
    Const(Constant),
    /// reference to a declared constant, a bound variable, or a nullary
    /// defined symbol
    Var(Symbol),
    App {
        op: Symbol,
        indices: Vec<Index>,
        /// `(as op Sort)` ascription, e.g. ((as const (Array Int Int)) 0)
        qual: Option<Sort>,
        args: Vec<Term>,
    },
    Quant {
        binder: Binder,
        bound: Vec<(Symbol, Sort)>,
        body: Term,
    },
    /// only alive between parsing and expansion; fragmentation never sees it
    Let {
        bindings: Vec<(Symbol, Term)>,
        body: Term,
    },
    Annot {
        body: Term,
        attrs: Vec<Attribute>,
    },
}

#[derive(Debug)]
pub struct TermNode {
    kind: TermKind,
    sort: Sort,
    depth: u32,
    hash: u64,
}

/// Immutable shared term. Equality and hashing are structural; the
/// precomputed hash plus pointer identity keep comparisons cheap on shared
/// subtrees.
#[derive(Clone, Debug)]
pub struct Term(Arc<TermNode>);

fn mix(h: &mut u64, v: u64) {
    *h = (*h ^ v).wrapping_mul(0x0000_0100_0000_01b3);
    *h ^= *h >> 29;
}

impl Term {
    fn build(kind: TermKind, sort: Sort) -> Term {
        let depth = match &kind {
            TermKind::Const(_) | TermKind::Var(_) => 1,
            TermKind::App { args, .. } => {
                1 + args.iter().map(|a| a.depth()).max().unwrap_or(0)
            }
            TermKind::Quant { body, .. } => 1 + body.depth(),
            TermKind::Let { bindings, body } => {
                let inner = bindings
                    .iter()
                    .map(|(_, v)| v.depth())
                    .chain(std::iter::once(body.depth()))
                    .max()
                    .unwrap_or(0);
                1 + inner
            }
            // annotations are metadata: they never count toward the depth
            // bound, otherwise naming an assert would change its depth
            TermKind::Annot { body, .. } => body.depth(),
        };
        let mut h: u64 = match &kind {
            TermKind::Const(c) => {
                let mut h = 0x01u64;
                match c {
                    Constant::Bool(b) => mix(&mut h, 0x10 ^ *b as u64),
                    Constant::Numeral(s) => mix(&mut h, 0x20 ^ fnv1a(s.as_bytes())),
                    Constant::Decimal(s) => mix(&mut h, 0x30 ^ fnv1a(s.as_bytes())),
                    Constant::Hex(s) => mix(&mut h, 0x40 ^ fnv1a(s.as_bytes())),
                    Constant::Bin(s) => mix(&mut h, 0x50 ^ fnv1a(s.as_bytes())),
                    Constant::Str(s) => mix(&mut h, 0x60 ^ fnv1a(s.as_bytes())),
                    Constant::BvNum { value, width } => {
                        mix(&mut h, 0x70 ^ fnv1a(value.as_bytes()) ^ width)
                    }
                }
                h
            }
            TermKind::Var(s) => {
                let mut h = 0x02u64;
                mix(&mut h, fnv1a(s.as_bytes()));
                h
            }
            TermKind::App {
                op,
                indices,
                qual,
                args,
            } => {
                let mut h = 0x03u64;
                mix(&mut h, fnv1a(op.as_bytes()));
                for i in indices {
                    match i {
                        Index::Num(n) => mix(&mut h, 0x100 ^ n),
                        Index::Sym(s) => mix(&mut h, 0x200 ^ fnv1a(s.as_bytes())),
                    }
                }
                if let Some(q) = qual {
                    q.feed_hash(&mut h);
                }
                for a in args {
                    mix(&mut h, a.hash_value());
                }
                h
            }
            TermKind::Quant { binder, bound, body } => {
                let mut h = match binder {
                    Binder::Forall => 0x04u64,
                    Binder::Exists => 0x05u64,
                };
                for (s, so) in bound {
                    mix(&mut h, fnv1a(s.as_bytes()));
                    so.feed_hash(&mut h);
                }
                mix(&mut h, body.hash_value());
                h
            }
            TermKind::Let { bindings, body } => {
                let mut h = 0x06u64;
                for (s, v) in bindings {
                    mix(&mut h, fnv1a(s.as_bytes()));
                    mix(&mut h, v.hash_value());
                }
                mix(&mut h, body.hash_value());
                h
            }
            TermKind::Annot { body, attrs } => {
                let mut h = 0x07u64;
                mix(&mut h, body.hash_value());
                mix(&mut h, attrs.len() as u64);
                for a in attrs {
                    mix(&mut h, fnv1a(a.key.as_bytes()));
                }
                h
            }
        };
        sort.feed_hash(&mut h);
        Term(Arc::new(TermNode {
            kind,
            sort,
            depth,
            hash: h,
        }))
    }

    pub fn constant(c: Constant, sort: Sort) -> Term {
        Term::build(TermKind::Const(c), sort)
    }

    pub fn bool_const(b: bool) -> Term {
        Term::constant(Constant::Bool(b), Sort::bool_sort())
    }

    pub fn var(name: impl Into<Symbol>, sort: Sort) -> Term {
        Term::build(TermKind::Var(name.into()), sort)
    }

    pub fn app(
        op: impl Into<Symbol>,
        indices: Vec<Index>,
        qual: Option<Sort>,
        args: Vec<Term>,
        sort: Sort,
    ) -> Term {
        Term::build(
            TermKind::App {
                op: op.into(),
                indices,
                qual,
                args,
            },
            sort,
        )
    }

    pub fn simple_app(op: impl Into<Symbol>, args: Vec<Term>, sort: Sort) -> Term {
        Term::app(op, Vec::new(), None, args, sort)
    }

    pub fn and(a: Term, b: Term) -> Term {
        Term::simple_app("and", vec![a, b], Sort::bool_sort())
    }

    pub fn not(a: Term) -> Term {
        Term::simple_app("not", vec![a], Sort::bool_sort())
    }

    pub fn quant(binder: Binder, bound: Vec<(Symbol, Sort)>, body: Term) -> Term {
        Term::build(TermKind::Quant { binder, bound, body }, Sort::bool_sort())
    }

    pub fn let_(bindings: Vec<(Symbol, Term)>, body: Term) -> Term {
        let sort = body.sort().clone();
        Term::build(TermKind::Let { bindings, body }, sort)
    }

    pub fn annot(body: Term, attrs: Vec<Attribute>) -> Term {
        let sort = body.sort().clone();
        Term::build(TermKind::Annot { body, attrs }, sort)
    }

    pub fn kind(&self) -> &TermKind {
        &self.0.kind
    }

    pub fn sort(&self) -> &Sort {
        &self.0.sort
    }

    /// Cached tree depth: leaves are 1, inner nodes 1 + max over children,
    /// annotations transparent.
    pub fn depth(&self) -> u32 {
        self.0.depth
    }

    pub fn hash_value(&self) -> u64 {
        self.0.hash
    }

    pub fn ptr_eq(&self, other: &Term) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Direct subterms, in syntactic order.
    pub fn children(&self) -> Vec<&Term> {
        match self.kind() {
            TermKind::Const(_) | TermKind::Var(_) => Vec::new(),
            TermKind::App { args, .. } => args.iter().collect(),
            TermKind::Quant { body, .. } => vec![body],
            TermKind::Let { bindings, body } => bindings
                .iter()
                .map(|(_, v)| v)
                .chain(std::iter::once(body))
                .collect(),
            TermKind::Annot { body, .. } => vec![body],
        }
    }

    /// `not` applications unwrapped one level, used by the generators.
    pub fn strip_not(&self) -> Option<&Term> {
        if let TermKind::App { op, args, indices, qual } = self.kind() {
            if op.as_str() == "not" && args.len() == 1 && indices.is_empty() && qual.is_none() {
                return Some(&args[0]);
            }
        }
        None
    }

    /// Free symbols (variables and uninterpreted function heads) of the
    /// term, excluding anything bound by an enclosing quantifier or let.
    pub fn free_symbols(&self) -> HashSet<Symbol> {
        fn walk(t: &Term, bound: &mut Vec<Symbol>, out: &mut HashSet<Symbol>) {
            match t.kind() {
                TermKind::Const(_) => {}
                TermKind::Var(s) => {
                    if !bound.iter().any(|b| b == s) {
                        out.insert(s.clone());
                    }
                }
                TermKind::App { op, args, .. } => {
                    // applied heads can only be global symbols (no
                    // higher-order binders in this grammar), but a head that
                    // is also a declared symbol still counts as free use
                    if !bound.iter().any(|b| b == op) {
                        out.insert(op.clone());
                    }
                    for a in args {
                        walk(a, bound, out);
                    }
                }
                TermKind::Quant { bound: bs, body, .. } => {
                    let n = bs.len();
                    bound.extend(bs.iter().map(|(s, _)| s.clone()));
                    walk(body, bound, out);
                    bound.truncate(bound.len() - n);
                }
                TermKind::Let { bindings, body } => {
                    for (_, v) in bindings {
                        walk(v, bound, out);
                    }
                    let n = bindings.len();
                    bound.extend(bindings.iter().map(|(s, _)| s.clone()));
                    walk(body, bound, out);
                    bound.truncate(bound.len() - n);
                }
                TermKind::Annot { body, .. } => walk(body, bound, out),
            }
        }
        let mut out = HashSet::new();
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// Logical node count (shared subtrees counted by multiplicity),
    /// saturating. Guards the let-expansion growth cap.
    pub fn node_count(&self) -> u64 {
        use std::collections::HashMap;
        fn walk(t: &Term, memo: &mut HashMap<usize, u64>) -> u64 {
            let key = Arc::as_ptr(&t.0) as usize;
            if let Some(&n) = memo.get(&key) {
                return n;
            }
            let n = t
                .children()
                .iter()
                .fold(1u64, |acc, c| acc.saturating_add(walk(c, memo)));
            memo.insert(key, n);
            n
        }
        walk(self, &mut HashMap::new())
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.0.hash != other.0.hash || self.0.depth != other.0.depth {
            return false;
        }
        if self.0.sort != other.0.sort {
            return false;
        }
        match (&self.0.kind, &other.0.kind) {
            (TermKind::Const(a), TermKind::Const(b)) => a == b,
            (TermKind::Var(a), TermKind::Var(b)) => a == b,
            (
                TermKind::App {
                    op: o1,
                    indices: i1,
                    qual: q1,
                    args: a1,
                },
                TermKind::App {
                    op: o2,
                    indices: i2,
                    qual: q2,
                    args: a2,
                },
            ) => o1 == o2 && i1 == i2 && q1 == q2 && a1 == a2,
            (
                TermKind::Quant {
                    binder: b1,
                    bound: v1,
                    body: t1,
                },
                TermKind::Quant {
                    binder: b2,
                    bound: v2,
                    body: t2,
                },
            ) => b1 == b2 && v1 == v2 && t1 == t2,
            (
                TermKind::Let {
                    bindings: b1,
                    body: t1,
                },
                TermKind::Let {
                    bindings: b2,
                    body: t2,
                },
            ) => b1 == b2 && t1 == t2,
            (
                TermKind::Annot {
                    body: t1,
                    attrs: a1,
                },
                TermKind::Annot {
                    body: t2,
                    attrs: a2,
                },
            ) => t1 == t2 && a1 == a2,
            _ => false,
        }
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::printer::print_term(self))
    }
}

/// Datatype declaration payload for (declare-datatypes ...).
#[derive(Clone, PartialEq, Debug)]
pub struct DatatypeDecl {
    pub name: Symbol,
    pub constructors: Vec<ConstructorDecl>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct ConstructorDecl {
    pub name: Symbol,
    pub selectors: Vec<(Symbol, Sort)>,
}

#[derive(Clone, PartialEq, Debug)]
pub enum Command {
    SetLogic(Symbol),
    DeclareConst { name: Symbol, sort: Sort },
    DeclareFun { name: Symbol, params: Vec<Sort>, ret: Sort },
    DeclareSort { name: Symbol, arity: u32 },
    DeclareDatatypes(Vec<DatatypeDecl>),
    DefineFun { name: Symbol, params: Vec<(Symbol, Sort)>, ret: Sort, body: Term },
    Assert(Term),
    CheckSat,
    /// tactic-bearing check kept verbatim; still counts as a check point
    CheckSatUsing(super::sexpr::SExpr),
    Push(u32),
    Pop(u32),
    GetModel,
    Exit,
    /// any other well-formed command (set-option, set-info, echo, ...)
    Passthrough(super::sexpr::SExpr),
}

impl Command {
    pub fn is_declaration(&self) -> bool {
        matches!(
            self,
            Command::DeclareConst { .. }
                | Command::DeclareFun { .. }
                | Command::DeclareSort { .. }
                | Command::DeclareDatatypes(_)
                | Command::DefineFun { .. }
        )
    }

    pub fn is_check(&self) -> bool {
        matches!(self, Command::CheckSat | Command::CheckSatUsing(_))
    }
}

/// Parsed script: the ordered command stream is the source of truth; the
/// accessors project out the views the pipeline works with.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Script {
    pub commands: Vec<Command>,
}

impl Script {
    pub fn logic(&self) -> Option<&Symbol> {
        self.commands.iter().find_map(|c| match c {
            Command::SetLogic(l) => Some(l),
            _ => None,
        })
    }

    pub fn assertions(&self) -> Vec<&Term> {
        self.commands
            .iter()
            .filter_map(|c| match c {
                Command::Assert(t) => Some(t),
                _ => None,
            })
            .collect()
    }

    pub fn declarations(&self) -> Vec<&Command> {
        self.commands.iter().filter(|c| c.is_declaration()).collect()
    }

    /// Positions of check-sat (and check-sat-using) commands.
    pub fn check_points(&self) -> Vec<usize> {
        self.commands
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.is_check().then_some(i))
            .collect()
    }

    pub fn to_text(&self) -> String {
        super::printer::print_script(self)
    }

    /// Max depth over all asserted terms; 0 for an assertion-free script.
    pub fn max_assert_depth(&self) -> u32 {
        self.assertions().iter().map(|t| t.depth()).max().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(name: &str) -> Term {
        Term::var(name, Sort::bool_sort())
    }

    #[test]
    fn depth_of_leaf_is_one() {
        assert_eq!(atom("a").depth(), 1);
        assert_eq!(Term::bool_const(true).depth(), 1);
    }

    #[test]
    fn depth_counts_longest_path() {
        // AND(a, NOT(b)): 1 + max(1, 2) = 3
        let t = Term::and(atom("a"), Term::not(atom("b")));
        assert_eq!(t.depth(), 3);

        // AND(f1, OR(f2, f3)) with leaves: 3
        let or = Term::simple_app("or", vec![atom("f2"), atom("f3")], Sort::bool_sort());
        let t = Term::and(atom("f1"), or);
        assert_eq!(t.depth(), 3);
    }

    #[test]
    fn depth_ignores_annotations() {
        let inner = Term::and(atom("a"), atom("b"));
        let named = Term::annot(
            inner.clone(),
            vec![Attribute {
                key: ":named".into(),
                value: None,
            }],
        );
        assert_eq!(named.depth(), inner.depth());
    }

    #[test]
    fn quantifier_adds_a_level() {
        let body = Term::simple_app(
            ">=",
            vec![Term::var("y", Sort::int()), Term::var("x", Sort::int())],
            Sort::bool_sort(),
        );
        let q = Term::quant(
            Binder::Forall,
            vec![(Symbol::new("y"), Sort::int())],
            body.clone(),
        );
        assert_eq!(q.depth(), body.depth() + 1);
    }

    #[test]
    fn structural_equality_and_hash() {
        let a = Term::and(atom("p"), Term::not(atom("q")));
        let b = Term::and(atom("p"), Term::not(atom("q")));
        assert_eq!(a, b);
        assert_eq!(a.hash_value(), b.hash_value());
        let c = Term::and(Term::not(atom("q")), atom("p"));
        assert_ne!(a, c);
    }

    #[test]
    fn depth_cache_matches_recomputation() {
        fn recompute(t: &Term) -> u32 {
            match t.kind() {
                TermKind::Annot { body, .. } => recompute(body),
                _ => {
                    let kids = t.children();
                    if kids.is_empty() {
                        1
                    } else {
                        1 + kids.iter().map(|c| recompute(c)).max().unwrap()
                    }
                }
            }
        }
        let or = Term::simple_app("or", vec![atom("f2"), atom("f3")], Sort::bool_sort());
        let t = Term::and(atom("f1"), Term::not(Term::and(or, atom("g"))));
        assert_eq!(t.depth(), recompute(&t));
    }

    #[test]
    fn free_symbols_skip_bound_variables() {
        let body = Term::simple_app(
            ">=",
            vec![Term::var("y", Sort::int()), Term::var("x", Sort::int())],
            Sort::bool_sort(),
        );
        let q = Term::quant(Binder::Forall, vec![(Symbol::new("y"), Sort::int())], body);
        let free = q.free_symbols();
        assert!(free.contains(&Symbol::new("x")));
        assert!(!free.contains(&Symbol::new("y")));
        assert!(free.contains(&Symbol::new(">=")));
    }

    #[test]
    fn node_count_counts_shared_subtrees_by_multiplicity() {
        let a = atom("a");
        let both = Term::and(a.clone(), a.clone());
        assert_eq!(both.node_count(), 3);
    }

    #[test]
    fn bitvec_sort_accessors() {
        let s = Sort::bitvec(8);
        assert_eq!(s.bitvec_width(), Some(8));
        assert!(!s.is_bool());
        let a = Sort::array(Sort::int(), Sort::bool_sort());
        let (i, e) = a.array_sorts().unwrap();
        assert!(i.is_int());
        assert!(e.is_bool());
    }
}
