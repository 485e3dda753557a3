//! SMT-LIB v2 command and term parser with well-sortedness checking.
//!
//! Supported commands: set-logic, declare-const, declare-fun, declare-sort,
//! declare-datatype(s), define-fun (inlined at use sites), define-sort
//! (nullary aliases), assert, check-sat, check-sat-using (passthrough),
//! push, pop, get-model, exit. Any other list command with a symbol head is
//! preserved verbatim as a passthrough entry. let bindings are expanded
//! inline after parsing, with a growth cap so pathological seeds are
//! rejected instead of exploding.
//!
//! Declarations are treated as global even when they appear under push;
//! seed scripts that redeclare a popped symbol are rejected.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::ast::{
    Attribute, Binder, Command, Constant, ConstructorDecl, DatatypeDecl, Index, Script, Sort,
    SortArg, Symbol, Term,
};
use super::sexpr::{parse_sexprs, Atom, SExpr, SExprKind};
use super::subst;

/// Per-assertion cap on let-expansion growth: expanded logical node count
/// may not exceed 10x the pre-expansion count.
const LET_GROWTH_CAP: u64 = 10;

#[derive(Clone, Debug)]
pub enum FunKind {
    /// declare-const / declare-fun
    Declared,
    /// define-fun body, inlined at each call site
    Defined { params: Vec<(Symbol, Sort)>, body: Term },
    /// datatype constructor
    Constructor,
    /// datatype selector
    Selector,
}

#[derive(Clone, Debug)]
pub struct FunSig {
    pub params: Vec<Sort>,
    pub ret: Sort,
    pub kind: FunKind,
}

/// Global declarations of a script: sorts, sort aliases, datatypes,
/// functions. Rebuildable from a parsed Script for model parsing.
#[derive(Clone, Debug, Default)]
pub struct SymbolTable {
    pub sorts: HashMap<Symbol, u32>,
    pub sort_aliases: HashMap<Symbol, Sort>,
    pub datatypes: HashMap<Symbol, Vec<ConstructorDecl>>,
    pub funs: HashMap<Symbol, FunSig>,
}

impl SymbolTable {
    pub fn is_uninterpreted_sort(&self, s: &Sort) -> bool {
        s.args.is_empty()
            && self.sorts.contains_key(&s.name)
            && !self.datatypes.contains_key(&s.name)
    }

    pub fn declared_consts(&self) -> impl Iterator<Item = (&Symbol, &FunSig)> {
        self.funs.iter().filter(|(_, sig)| {
            sig.params.is_empty() && matches!(sig.kind, FunKind::Declared)
        })
    }

    /// Register the declarations of `script` (used to re-create the parse
    /// context when reading solver models against a seed).
    pub fn from_script(script: &Script) -> SymbolTable {
        let mut ctx = Ctx::default();
        for cmd in &script.commands {
            ctx.register_command(cmd);
        }
        ctx.table
    }
}

#[derive(Default)]
struct Ctx {
    table: SymbolTable,
    logic: Option<Symbol>,
    /// in pure-real logics numerals denote reals
    real_numerals: bool,
}

/// Logics where plain numerals denote Real values.
pub fn numerals_are_real(logic: &str) -> bool {
    let has_real = logic.contains("RA") || logic.contains("RDL");
    let has_int = logic.contains("IA") || logic.contains("IDL") || logic.contains("IRA");
    has_real && !has_int
}

pub fn parse_script(text: &str) -> Result<Script> {
    let sexprs = parse_sexprs(text)?;
    let mut ctx = Ctx::default();
    let mut commands = Vec::with_capacity(sexprs.len());
    for sx in &sexprs {
        commands.push(ctx.command(sx)?);
    }
    Ok(Script { commands })
}

/// Parse one term against an existing table (model values, mock triggers).
pub fn parse_term_with(table: &SymbolTable, real_numerals: bool, sx: &SExpr) -> Result<Term> {
    parse_term_scoped(table, real_numerals, sx, &[])
}

/// Like [`parse_term_with`], with `bound` in scope (used for the parameter
/// lists of function interpretations in solver models).
pub fn parse_term_scoped(
    table: &SymbolTable,
    real_numerals: bool,
    sx: &SExpr,
    bound: &[(Symbol, Sort)],
) -> Result<Term> {
    let ctx = Ctx {
        table: table.clone(),
        logic: None,
        real_numerals,
    };
    let mut scopes = Scopes {
        stack: bound.to_vec(),
    };
    let t = ctx.term(sx, &mut scopes)?;
    subst::expand_lets(&t, t.node_count().saturating_mul(LET_GROWTH_CAP).max(10_000))
}

#[derive(Default)]
struct Scopes {
    stack: Vec<(Symbol, Sort)>,
}

impl Scopes {
    fn lookup(&self, name: &str) -> Option<&Sort> {
        self.stack
            .iter()
            .rev()
            .find(|(s, _)| s.as_str() == name)
            .map(|(_, sort)| sort)
    }
}

impl Ctx {
    fn command(&mut self, sx: &SExpr) -> Result<Command> {
        let items = sx
            .as_list()
            .ok_or_else(|| sx.error("expected a command list"))?;
        let head = sx
            .head()
            .ok_or_else(|| sx.error("expected a command name"))?;
        let cmd = match head {
            "set-logic" => {
                if self.logic.is_some() {
                    return Err(sx.error("more than one set-logic command"));
                }
                let name = expect_sym(items.get(1), sx, "logic name")?;
                let logic = Symbol::new(name);
                self.real_numerals = numerals_are_real(name);
                self.logic = Some(logic.clone());
                Command::SetLogic(logic)
            }
            "declare-const" => {
                let name = self.fresh_symbol(items.get(1), sx)?;
                let sort = self.sort(arg(items, 2, sx, "sort")?)?;
                self.table.funs.insert(
                    name.clone(),
                    FunSig {
                        params: Vec::new(),
                        ret: sort.clone(),
                        kind: FunKind::Declared,
                    },
                );
                Command::DeclareConst { name, sort }
            }
            "declare-fun" => {
                let name = self.fresh_symbol(items.get(1), sx)?;
                let params = arg(items, 2, sx, "parameter sorts")?
                    .as_list()
                    .ok_or_else(|| sx.error("declare-fun expects a sort list"))?
                    .iter()
                    .map(|s| self.sort(s))
                    .collect::<Result<Vec<_>>>()?;
                let ret = self.sort(arg(items, 3, sx, "return sort")?)?;
                self.table.funs.insert(
                    name.clone(),
                    FunSig {
                        params: params.clone(),
                        ret: ret.clone(),
                        kind: FunKind::Declared,
                    },
                );
                Command::DeclareFun { name, params, ret }
            }
            "declare-sort" => {
                let name = self.fresh_symbol(items.get(1), sx)?;
                let arity = match items.get(2) {
                    None => 0,
                    Some(a) => match a.as_atom() {
                        Some(Atom::Num(n)) => n
                            .parse::<u32>()
                            .map_err(|_| a.error("sort arity out of range"))?,
                        _ => return Err(a.error("sort arity must be a numeral")),
                    },
                };
                self.table.sorts.insert(name.clone(), arity);
                Command::DeclareSort { name, arity }
            }
            "define-sort" => {
                // nullary aliases only; registered for sort resolution and
                // kept verbatim so the script reprints unchanged
                let name = self.fresh_symbol(items.get(1), sx)?;
                let params = arg(items, 2, sx, "sort parameters")?
                    .as_list()
                    .ok_or_else(|| sx.error("define-sort expects a parameter list"))?;
                if !params.is_empty() {
                    return Err(Error::Unsupported(
                        "parametric define-sort is not supported".into(),
                    ));
                }
                let target = self.sort(arg(items, 3, sx, "sort")?)?;
                self.table.sort_aliases.insert(name, target);
                Command::Passthrough(sx.clone())
            }
            "declare-datatypes" => {
                let decls = self.datatypes_plural(items, sx)?;
                Command::DeclareDatatypes(decls)
            }
            "declare-datatype" => {
                let name = self.fresh_symbol(items.get(1), sx)?;
                self.table.sorts.insert(name.clone(), 0);
                let ctors =
                    self.datatype_body(name.clone(), arg(items, 2, sx, "constructor list")?)?;
                Command::DeclareDatatypes(vec![DatatypeDecl {
                    name,
                    constructors: ctors,
                }])
            }
            "define-fun" => {
                let name = self.fresh_symbol(items.get(1), sx)?;
                let params = self.sorted_vars(arg(items, 2, sx, "parameter list")?)?;
                let ret = self.sort(arg(items, 3, sx, "return sort")?)?;
                let body_sx = arg(items, 4, sx, "body")?;
                let mut scopes = Scopes {
                    stack: params.clone(),
                };
                let body = self.term(body_sx, &mut scopes)?;
                let body = subst::expand_lets(
                    &body,
                    body.node_count().saturating_mul(LET_GROWTH_CAP).max(10_000),
                )?;
                if body.sort() != &ret {
                    return Err(Error::Sort(format!(
                        "define-fun {name}: body sort {} does not match declared {}",
                        super::printer::print_sort(body.sort()),
                        super::printer::print_sort(&ret)
                    )));
                }
                self.table.funs.insert(
                    name.clone(),
                    FunSig {
                        params: params.iter().map(|(_, s)| s.clone()).collect(),
                        ret: ret.clone(),
                        kind: FunKind::Defined {
                            params: params.clone(),
                            body: body.clone(),
                        },
                    },
                );
                Command::DefineFun {
                    name,
                    params,
                    ret,
                    body,
                }
            }
            "define-fun-rec" | "define-funs-rec" => {
                return Err(Error::Unsupported(format!(
                    "{head} is not supported (recursive definitions cannot be inlined)"
                )))
            }
            "assert" => {
                let term_sx = arg(items, 1, sx, "term")?;
                let mut scopes = Scopes::default();
                let term = self.term(term_sx, &mut scopes)?;
                if !term.sort().is_bool() {
                    return Err(Error::Sort(format!(
                        "asserted term has sort {}, expected Bool",
                        super::printer::print_sort(term.sort())
                    )));
                }
                let cap = term
                    .node_count()
                    .saturating_mul(LET_GROWTH_CAP)
                    .max(10_000);
                let term = subst::expand_lets(&term, cap)?;
                Command::Assert(term)
            }
            "check-sat" => Command::CheckSat,
            "check-sat-using" => Command::CheckSatUsing(sx.clone()),
            "push" => Command::Push(level_arg(items, sx)?),
            "pop" => Command::Pop(level_arg(items, sx)?),
            "get-model" => Command::GetModel,
            "exit" => Command::Exit,
            _ => Command::Passthrough(sx.clone()),
        };
        Ok(cmd)
    }

    /// Re-register declarations from an already parsed command.
    fn register_command(&mut self, cmd: &Command) {
        match cmd {
            Command::SetLogic(l) => {
                self.real_numerals = numerals_are_real(l.as_str());
                self.logic = Some(l.clone());
            }
            Command::DeclareConst { name, sort } => {
                self.table.funs.insert(
                    name.clone(),
                    FunSig {
                        params: Vec::new(),
                        ret: sort.clone(),
                        kind: FunKind::Declared,
                    },
                );
            }
            Command::DeclareFun { name, params, ret } => {
                self.table.funs.insert(
                    name.clone(),
                    FunSig {
                        params: params.clone(),
                        ret: ret.clone(),
                        kind: FunKind::Declared,
                    },
                );
            }
            Command::DeclareSort { name, arity } => {
                self.table.sorts.insert(name.clone(), *arity);
            }
            Command::DeclareDatatypes(decls) => {
                for d in decls {
                    self.table.sorts.insert(d.name.clone(), 0);
                }
                for d in decls {
                    self.register_datatype(d.name.clone(), d.constructors.clone());
                }
            }
            Command::DefineFun {
                name,
                params,
                ret,
                body,
            } => {
                self.table.funs.insert(
                    name.clone(),
                    FunSig {
                        params: params.iter().map(|(_, s)| s.clone()).collect(),
                        ret: ret.clone(),
                        kind: FunKind::Defined {
                            params: params.clone(),
                            body: body.clone(),
                        },
                    },
                );
            }
            _ => {}
        }
    }

    fn register_datatype(&mut self, name: Symbol, ctors: Vec<ConstructorDecl>) {
        let dt_sort = Sort::simple(name.clone());
        for ctor in &ctors {
            self.table.funs.insert(
                ctor.name.clone(),
                FunSig {
                    params: ctor.selectors.iter().map(|(_, s)| s.clone()).collect(),
                    ret: dt_sort.clone(),
                    kind: FunKind::Constructor,
                },
            );
            for (sel, sel_sort) in &ctor.selectors {
                self.table.funs.insert(
                    sel.clone(),
                    FunSig {
                        params: vec![dt_sort.clone()],
                        ret: sel_sort.clone(),
                        kind: FunKind::Selector,
                    },
                );
            }
        }
        self.table.datatypes.insert(name, ctors);
    }

    fn datatypes_plural(&mut self, items: &[SExpr], sx: &SExpr) -> Result<Vec<DatatypeDecl>> {
        let names_sx = arg(items, 1, sx, "datatype name list")?
            .as_list()
            .ok_or_else(|| sx.error("declare-datatypes expects a name list"))?;
        let bodies_sx = arg(items, 2, sx, "datatype body list")?
            .as_list()
            .ok_or_else(|| sx.error("declare-datatypes expects a body list"))?;
        if names_sx.len() != bodies_sx.len() {
            return Err(sx.error("declare-datatypes name/body count mismatch"));
        }
        // register every sort name before parsing bodies so mutually
        // recursive datatypes resolve
        let mut names = Vec::new();
        for n in names_sx {
            let pair = n
                .as_list()
                .ok_or_else(|| n.error("expected (Name arity)"))?;
            let name = Symbol::new(expect_sym(pair.first(), n, "datatype name")?);
            let arity = pair
                .get(1)
                .and_then(|a| a.as_atom())
                .and_then(|a| match a {
                    Atom::Num(v) => v.parse::<u32>().ok(),
                    _ => None,
                })
                .ok_or_else(|| n.error("expected (Name arity)"))?;
            if arity != 0 {
                return Err(Error::Unsupported(
                    "parametric datatypes are not supported".into(),
                ));
            }
            if self.table.sorts.contains_key(&name) || self.table.sort_aliases.contains_key(&name)
            {
                return Err(n.error(format!("sort `{name}` redeclared")));
            }
            self.table.sorts.insert(name.clone(), 0);
            names.push(name);
        }
        let mut decls = Vec::new();
        for (name, body) in names.into_iter().zip(bodies_sx) {
            let ctors = self.datatype_body(name.clone(), body)?;
            decls.push(DatatypeDecl {
                name,
                constructors: ctors,
            });
        }
        Ok(decls)
    }

    fn datatype_body(&mut self, name: Symbol, body: &SExpr) -> Result<Vec<ConstructorDecl>> {
        let ctor_list = body
            .as_list()
            .ok_or_else(|| body.error("expected a constructor list"))?;
        if ctor_list.first().and_then(|c| c.as_sym()) == Some("par") {
            return Err(Error::Unsupported(
                "parametric datatypes are not supported".into(),
            ));
        }
        let mut ctors = Vec::new();
        for c in ctor_list {
            let parts = c.as_list().ok_or_else(|| c.error("expected (ctor ...)"))?;
            let cname = Symbol::new(expect_sym(parts.first(), c, "constructor name")?);
            let mut selectors = Vec::new();
            for sel in &parts[1..] {
                let sel_parts = sel
                    .as_list()
                    .ok_or_else(|| sel.error("expected (selector Sort)"))?;
                if sel_parts.len() != 2 {
                    return Err(sel.error("expected (selector Sort)"));
                }
                let sel_name = Symbol::new(expect_sym(sel_parts.first(), sel, "selector name")?);
                let sel_sort = self.sort(&sel_parts[1])?;
                selectors.push((sel_name, sel_sort));
            }
            ctors.push(ConstructorDecl {
                name: cname,
                selectors,
            });
        }
        self.register_datatype(name, ctors.clone());
        Ok(ctors)
    }

    fn fresh_symbol(&self, sx: Option<&SExpr>, parent: &SExpr) -> Result<Symbol> {
        let name = expect_sym(sx, parent, "symbol")?;
        let sym = Symbol::new(name);
        if self.table.funs.contains_key(&sym)
            || self.table.sorts.contains_key(&sym)
            || self.table.sort_aliases.contains_key(&sym)
        {
            return Err(parent.error(format!("symbol `{name}` redeclared")));
        }
        Ok(sym)
    }

    fn sorted_vars(&self, sx: &SExpr) -> Result<Vec<(Symbol, Sort)>> {
        sx.as_list()
            .ok_or_else(|| sx.error("expected a sorted-variable list"))?
            .iter()
            .map(|pair| {
                let parts = pair
                    .as_list()
                    .ok_or_else(|| pair.error("expected (name Sort)"))?;
                if parts.len() != 2 {
                    return Err(pair.error("expected (name Sort)"));
                }
                let name = Symbol::new(expect_sym(parts.first(), pair, "variable name")?);
                let sort = self.sort(&parts[1])?;
                Ok((name, sort))
            })
            .collect()
    }

    fn sort(&self, sx: &SExpr) -> Result<Sort> {
        match &sx.kind {
            SExprKind::Atom(Atom::Sym(name)) => match name.as_str() {
                "Bool" | "Int" | "Real" | "String" | "RegLan" | "RoundingMode" => {
                    Ok(Sort::simple(name.as_str()))
                }
                _ => {
                    let sym = Symbol::new(name);
                    if let Some(target) = self.table.sort_aliases.get(&sym) {
                        return Ok(target.clone());
                    }
                    match self.table.sorts.get(&sym) {
                        Some(0) => Ok(Sort::simple(sym)),
                        Some(n) => Err(sx.error(format!(
                            "sort `{name}` expects {n} arguments"
                        ))),
                        None => Err(sx.error(format!("unknown sort `{name}`"))),
                    }
                }
            },
            SExprKind::Atom(_) => Err(sx.error("expected a sort")),
            SExprKind::List(items) => {
                let head = items
                    .first()
                    .and_then(|h| h.as_sym())
                    .ok_or_else(|| sx.error("expected a sort"))?;
                match head {
                    "_" => {
                        let name = expect_sym(items.get(1), sx, "indexed sort name")?;
                        if name == "BitVec" {
                            let width = items
                                .get(2)
                                .and_then(|a| a.as_atom())
                                .and_then(|a| match a {
                                    Atom::Num(v) => v.parse::<u64>().ok(),
                                    _ => None,
                                })
                                .ok_or_else(|| sx.error("(_ BitVec n) expects a numeral"))?;
                            if width == 0 {
                                return Err(sx.error("bitvector width must be positive"));
                            }
                            Ok(Sort::bitvec(width))
                        } else {
                            Err(Error::Unsupported(format!(
                                "indexed sort (_ {name} ...)"
                            )))
                        }
                    }
                    "Array" => {
                        if items.len() != 3 {
                            return Err(sx.error("(Array Index Element) expects two sorts"));
                        }
                        Ok(Sort::array(self.sort(&items[1])?, self.sort(&items[2])?))
                    }
                    name => {
                        let sym = Symbol::new(name);
                        let arity = *self
                            .table
                            .sorts
                            .get(&sym)
                            .ok_or_else(|| sx.error(format!("unknown sort `{name}`")))?;
                        if arity as usize != items.len() - 1 {
                            return Err(sx.error(format!(
                                "sort `{name}` expects {arity} arguments"
                            )));
                        }
                        let args = items[1..]
                            .iter()
                            .map(|s| self.sort(s).map(SortArg::Sort))
                            .collect::<Result<Vec<_>>>()?;
                        Ok(Sort { name: sym, args })
                    }
                }
            }
        }
    }

    fn term(&self, sx: &SExpr, scopes: &mut Scopes) -> Result<Term> {
        match &sx.kind {
            SExprKind::Atom(atom) => self.atom_term(atom, sx, scopes),
            SExprKind::List(items) => {
                if items.is_empty() {
                    return Err(sx.error("empty application"));
                }
                match items[0].as_sym() {
                    Some("let") => self.let_term(items, sx, scopes),
                    Some("forall") => self.quant_term(Binder::Forall, items, sx, scopes),
                    Some("exists") => self.quant_term(Binder::Exists, items, sx, scopes),
                    Some("!") => self.annot_term(items, sx, scopes),
                    Some("_") => self.indexed_atom(items, sx),
                    Some("as") => self.qualified(items, sx, &[]),
                    Some("match") => Err(Error::Unsupported(
                        "match expressions are not supported".into(),
                    )),
                    Some(op) => self.apply(op, &items[1..], sx, scopes),
                    None => {
                        // list head, i.e. ((_ op idx) args) or ((as op S) args)
                        let head_items = items[0]
                            .as_list()
                            .ok_or_else(|| sx.error("expected an operator"))?;
                        match head_items.first().and_then(|h| h.as_sym()) {
                            Some("_") => {
                                let args = items[1..]
                                    .iter()
                                    .map(|a| self.term(a, scopes))
                                    .collect::<Result<Vec<_>>>()?;
                                self.indexed_apply(head_items, args, sx)
                            }
                            Some("as") => {
                                let args = items[1..]
                                    .iter()
                                    .map(|a| self.term(a, scopes))
                                    .collect::<Result<Vec<_>>>()?;
                                self.qualified(head_items, sx, &args)
                            }
                            _ => Err(sx.error("expected an operator")),
                        }
                    }
                }
            }
        }
    }

    fn atom_term(&self, atom: &Atom, sx: &SExpr, scopes: &Scopes) -> Result<Term> {
        match atom {
            Atom::Sym(name) => match name.as_str() {
                "true" => Ok(Term::bool_const(true)),
                "false" => Ok(Term::bool_const(false)),
                "re.allchar" | "re.none" | "re.all" => {
                    Ok(Term::simple_app(name.as_str(), Vec::new(), Sort::reglan()))
                }
                _ => {
                    if let Some(sort) = scopes.lookup(name) {
                        return Ok(Term::var(name.as_str(), sort.clone()));
                    }
                    let sym = Symbol::new(name);
                    match self.table.funs.get(&sym) {
                        Some(sig) if sig.params.is_empty() => match &sig.kind {
                            FunKind::Defined { body, .. } => Ok(body.clone()),
                            _ => Ok(Term::var(sym, sig.ret.clone())),
                        },
                        Some(_) => Err(sx.error(format!(
                            "function `{name}` used without arguments"
                        ))),
                        None => Err(sx.error(format!("unknown symbol `{name}`"))),
                    }
                }
            },
            Atom::Num(n) => {
                let sort = if self.real_numerals {
                    Sort::real()
                } else {
                    Sort::int()
                };
                Ok(Term::constant(Constant::Numeral(n.clone()), sort))
            }
            Atom::Dec(d) => Ok(Term::constant(Constant::Decimal(d.clone()), Sort::real())),
            Atom::Hex(h) => Ok(Term::constant(
                Constant::Hex(h.clone()),
                Sort::bitvec(4 * h.len() as u64),
            )),
            Atom::Bin(b) => Ok(Term::constant(
                Constant::Bin(b.clone()),
                Sort::bitvec(b.len() as u64),
            )),
            Atom::Str(s) => Ok(Term::constant(Constant::Str(s.clone()), Sort::string())),
            Atom::Kw(k) => Err(sx.error(format!("keyword :{k} is not a term"))),
        }
    }

    fn let_term(&self, items: &[SExpr], sx: &SExpr, scopes: &mut Scopes) -> Result<Term> {
        let binding_list = arg(items, 1, sx, "binding list")?
            .as_list()
            .ok_or_else(|| sx.error("let expects a binding list"))?;
        let mut bindings = Vec::new();
        for b in binding_list {
            let parts = b.as_list().ok_or_else(|| b.error("expected (name value)"))?;
            if parts.len() != 2 {
                return Err(b.error("expected (name value)"));
            }
            let name = Symbol::new(expect_sym(parts.first(), b, "binding name")?);
            // parallel let: values are parsed in the outer scope
            let value = self.term(&parts[1], scopes)?;
            bindings.push((name, value));
        }
        let depth_before = scopes.stack.len();
        for (name, value) in &bindings {
            scopes.stack.push((name.clone(), value.sort().clone()));
        }
        let body = self.term(arg(items, 2, sx, "body")?, scopes);
        scopes.stack.truncate(depth_before);
        Ok(Term::let_(bindings, body?))
    }

    fn quant_term(
        &self,
        binder: Binder,
        items: &[SExpr],
        sx: &SExpr,
        scopes: &mut Scopes,
    ) -> Result<Term> {
        let bound = self.sorted_vars(arg(items, 1, sx, "bound variable list")?)?;
        if bound.is_empty() {
            return Err(sx.error("quantifier with no bound variables"));
        }
        let depth_before = scopes.stack.len();
        scopes.stack.extend(bound.iter().cloned());
        let body = self.term(arg(items, 2, sx, "body")?, scopes);
        scopes.stack.truncate(depth_before);
        let body = body?;
        if !body.sort().is_bool() {
            return Err(Error::Sort("quantifier body must be Bool".into()));
        }
        Ok(Term::quant(binder, bound, body))
    }

    fn annot_term(&self, items: &[SExpr], sx: &SExpr, scopes: &mut Scopes) -> Result<Term> {
        let body = self.term(arg(items, 1, sx, "annotated term")?, scopes)?;
        let mut attrs = Vec::new();
        let mut i = 2;
        while i < items.len() {
            let key = match items[i].as_atom() {
                Some(Atom::Kw(k)) => k.clone(),
                _ => return Err(items[i].error("expected an attribute keyword")),
            };
            let value = match items.get(i + 1) {
                Some(v) if !matches!(v.as_atom(), Some(Atom::Kw(_))) => {
                    i += 1;
                    Some(v.clone())
                }
                _ => None,
            };
            attrs.push(Attribute {
                key: format!(":{key}"),
                value,
            });
            i += 1;
        }
        if attrs.is_empty() {
            return Err(sx.error("annotation without attributes"));
        }
        Ok(Term::annot(body, attrs))
    }

    /// Standalone indexed identifiers: (_ bv13 32) bitvector literals.
    fn indexed_atom(&self, items: &[SExpr], sx: &SExpr) -> Result<Term> {
        let name = expect_sym(items.get(1), sx, "indexed identifier")?;
        if let Some(value) = name.strip_prefix("bv") {
            if value.chars().all(|c| c.is_ascii_digit()) && !value.is_empty() {
                let width = items
                    .get(2)
                    .and_then(|a| a.as_atom())
                    .and_then(|a| match a {
                        Atom::Num(v) => v.parse::<u64>().ok(),
                        _ => None,
                    })
                    .ok_or_else(|| sx.error("(_ bvN w) expects a width numeral"))?;
                if width == 0 {
                    return Err(sx.error("bitvector width must be positive"));
                }
                return Ok(Term::constant(
                    Constant::BvNum {
                        value: value.to_string(),
                        width,
                    },
                    Sort::bitvec(width),
                ));
            }
        }
        Err(Error::Unsupported(format!(
            "indexed identifier (_ {name} ...) outside application position"
        )))
    }

    /// ((_ op idx...) args...) applications.
    fn indexed_apply(&self, head: &[SExpr], args: Vec<Term>, sx: &SExpr) -> Result<Term> {
        let op = expect_sym(head.get(1), sx, "indexed operator")?;
        let indices: Vec<Index> = head[2..]
            .iter()
            .map(|i| match i.as_atom() {
                Some(Atom::Num(n)) => n
                    .parse::<u64>()
                    .map(Index::Num)
                    .map_err(|_| i.error("index out of range")),
                Some(Atom::Sym(s)) => Ok(Index::Sym(Symbol::new(s))),
                _ => Err(i.error("expected a numeral or symbol index")),
            })
            .collect::<Result<Vec<_>>>()?;
        let nums: Vec<u64> = indices
            .iter()
            .filter_map(|i| match i {
                Index::Num(n) => Some(*n),
                Index::Sym(_) => None,
            })
            .collect();
        let sort = match op {
            "extract" => {
                let w = bv_width(&args, 0, "extract")?;
                let (hi, lo) = match nums.as_slice() {
                    [h, l] => (*h, *l),
                    _ => return Err(sx.error("(_ extract i j) expects two numerals")),
                };
                if hi < lo || hi >= w {
                    return Err(Error::Sort(format!(
                        "extract [{hi}:{lo}] out of range for width {w}"
                    )));
                }
                Sort::bitvec(hi - lo + 1)
            }
            "zero_extend" | "sign_extend" => {
                let w = bv_width(&args, 0, op)?;
                let n = single_index(&nums, sx, op)?;
                Sort::bitvec(w + n)
            }
            "rotate_left" | "rotate_right" => {
                let w = bv_width(&args, 0, op)?;
                single_index(&nums, sx, op)?;
                Sort::bitvec(w)
            }
            "repeat" => {
                let w = bv_width(&args, 0, op)?;
                let n = single_index(&nums, sx, op)?;
                if n == 0 {
                    return Err(Error::Sort("(_ repeat 0) is not allowed".into()));
                }
                Sort::bitvec(w * n)
            }
            "int2bv" => {
                let n = single_index(&nums, sx, op)?;
                if args.len() != 1 || !args[0].sort().is_int() {
                    return Err(Error::Sort("(_ int2bv n) expects one Int".into()));
                }
                if n == 0 {
                    return Err(sx.error("bitvector width must be positive"));
                }
                Sort::bitvec(n)
            }
            "divisible" => {
                let n = single_index(&nums, sx, op)?;
                if n == 0 {
                    return Err(Error::Sort("(_ divisible 0) is not allowed".into()));
                }
                if args.len() != 1 || !args[0].sort().is_int() {
                    return Err(Error::Sort("(_ divisible n) expects one Int".into()));
                }
                Sort::bool_sort()
            }
            "is" => {
                // datatype tester (_ is ctor)
                let ctor = match indices.as_slice() {
                    [Index::Sym(c)] => c.clone(),
                    _ => return Err(sx.error("(_ is ctor) expects a constructor symbol")),
                };
                let sig = self
                    .table
                    .funs
                    .get(&ctor)
                    .filter(|s| matches!(s.kind, FunKind::Constructor))
                    .ok_or_else(|| sx.error(format!("unknown constructor `{ctor}`")))?;
                if args.len() != 1 || args[0].sort() != &sig.ret {
                    return Err(Error::Sort(format!(
                        "(_ is {ctor}) expects one argument of sort {}",
                        super::printer::print_sort(&sig.ret)
                    )));
                }
                Sort::bool_sort()
            }
            "re.loop" => {
                if nums.len() != 2 || args.len() != 1 || args[0].sort() != &Sort::reglan() {
                    return Err(Error::Sort(
                        "(_ re.loop a b) expects one RegLan argument".into(),
                    ));
                }
                Sort::reglan()
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "indexed operator (_ {other} ...)"
                )))
            }
        };
        Ok(Term::app(op, indices, None, args, sort))
    }

    /// (as op Sort) qualified identifiers, bare or applied.
    fn qualified(&self, head: &[SExpr], sx: &SExpr, args: &[Term]) -> Result<Term> {
        let op = expect_sym(head.get(1), sx, "qualified identifier")?;
        let sort = self.sort(head.get(2).ok_or_else(|| sx.error("missing sort"))?)?;
        match op {
            "const" => {
                let (_, elem) = sort
                    .array_sorts()
                    .ok_or_else(|| Error::Sort("(as const S): S must be an array sort".into()))?;
                if args.len() != 1 || args[0].sort() != elem {
                    return Err(Error::Sort(
                        "(as const S) expects one element-sorted argument".into(),
                    ));
                }
                Ok(Term::app(
                    "const",
                    Vec::new(),
                    Some(sort.clone()),
                    args.to_vec(),
                    sort,
                ))
            }
            _ => {
                let sym = Symbol::new(op);
                let sig = self
                    .table
                    .funs
                    .get(&sym)
                    .ok_or_else(|| sx.error(format!("unknown symbol `{op}`")))?;
                if sig.ret != sort {
                    return Err(Error::Sort(format!(
                        "(as {op} ...) ascribes {}, declared {}",
                        super::printer::print_sort(&sort),
                        super::printer::print_sort(&sig.ret)
                    )));
                }
                check_arg_sorts(op, &sig.params, args)?;
                Ok(Term::app(sym, Vec::new(), Some(sort.clone()), args.to_vec(), sort))
            }
        }
    }

    fn apply(&self, op: &str, arg_sx: &[SExpr], sx: &SExpr, scopes: &mut Scopes) -> Result<Term> {
        let args: Vec<Term> = arg_sx
            .iter()
            .map(|a| self.term(a, scopes))
            .collect::<Result<Vec<_>>>()?;
        if scopes.lookup(op).is_some() {
            return Err(Error::Sort(format!(
                "bound variable `{op}` cannot be applied"
            )));
        }
        let sym = Symbol::new(op);
        if let Some(sig) = self.table.funs.get(&sym) {
            check_arg_sorts(op, &sig.params, &args)?;
            return match &sig.kind {
                FunKind::Defined { params, body } => {
                    let map: HashMap<Symbol, Term> = params
                        .iter()
                        .map(|(p, _)| p.clone())
                        .zip(args.iter().cloned())
                        .collect();
                    Ok(subst::substitute_map(body, &map))
                }
                _ => Ok(Term::simple_app(sym, args, sig.ret.clone())),
            };
        }
        let sort = theory_app_sort(op, &args)
            .ok_or_else(|| sx.error(format!("unknown symbol `{op}`")))??;
        Ok(Term::simple_app(sym, args, sort))
    }
}

fn expect_sym<'a>(sx: Option<&'a SExpr>, parent: &SExpr, what: &str) -> Result<&'a str> {
    sx.and_then(|s| s.as_sym())
        .ok_or_else(|| parent.error(format!("expected {what}")))
}

fn arg<'a>(items: &'a [SExpr], idx: usize, parent: &SExpr, what: &str) -> Result<&'a SExpr> {
    items
        .get(idx)
        .ok_or_else(|| parent.error(format!("missing {what}")))
}

fn level_arg(items: &[SExpr], _sx: &SExpr) -> Result<u32> {
    match items.get(1) {
        None => Ok(1),
        Some(a) => match a.as_atom() {
            Some(Atom::Num(n)) => n.parse::<u32>().map_err(|_| a.error("level out of range")),
            _ => Err(a.error("expected a numeral level")),
        },
    }
}

fn bv_width(args: &[Term], idx: usize, op: &str) -> Result<u64> {
    args.get(idx)
        .and_then(|a| a.sort().bitvec_width())
        .ok_or_else(|| Error::Sort(format!("{op} expects a bitvector argument")))
}

fn single_index(nums: &[u64], sx: &SExpr, op: &str) -> Result<u64> {
    match nums {
        [n] => Ok(*n),
        _ => Err(sx.error(format!("(_ {op} n) expects one numeral index"))),
    }
}

fn check_arg_sorts(op: &str, params: &[Sort], args: &[Term]) -> Result<()> {
    if params.len() != args.len() {
        return Err(Error::Sort(format!(
            "`{op}` expects {} arguments, got {}",
            params.len(),
            args.len()
        )));
    }
    for (i, (p, a)) in params.iter().zip(args).enumerate() {
        if a.sort() != p {
            return Err(Error::Sort(format!(
                "`{op}` argument {}: expected {}, got {}",
                i + 1,
                super::printer::print_sort(p),
                super::printer::print_sort(a.sort())
            )));
        }
    }
    Ok(())
}

/// Sort rules for the built-in theory operators. Returns None when `op` is
/// not a theory operator at all (the caller reports an unknown symbol).
fn theory_app_sort(op: &str, args: &[Term]) -> Option<Result<Sort>> {
    use Sort as S;
    let sorts: Vec<&Sort> = args.iter().map(|a| a.sort()).collect();
    let all_bool = || sorts.iter().all(|s| s.is_bool());
    let all_int = || sorts.iter().all(|s| s.is_int());
    let all_real = || sorts.iter().all(|s| s.is_real());
    let all_string = || sorts.iter().all(|s| s.is_string());
    let all_reglan = || sorts.iter().all(|s| **s == S::reglan());
    let all_same = || sorts.windows(2).all(|w| w[0] == w[1]);
    let same_bv = || {
        sorts
            .first()
            .and_then(|s| s.bitvec_width())
            .filter(|_| all_same())
    };
    let err = |msg: String| Some(Err(Error::Sort(msg)));
    let ok = |s: Sort| Some(Ok(s));
    let arity = args.len();

    match op {
        // core
        "not" => {
            if arity == 1 && all_bool() {
                ok(S::bool_sort())
            } else {
                err(format!("`not` expects one Bool, got {arity} args"))
            }
        }
        "and" | "or" | "xor" => {
            if arity >= 1 && all_bool() {
                ok(S::bool_sort())
            } else {
                err(format!("`{op}` expects Bool arguments"))
            }
        }
        "=>" => {
            if arity >= 2 && all_bool() {
                ok(S::bool_sort())
            } else {
                err("`=>` expects at least two Bool arguments".into())
            }
        }
        "=" | "distinct" => {
            if arity >= 2 && all_same() {
                ok(S::bool_sort())
            } else {
                err(format!("`{op}` expects arguments of one sort"))
            }
        }
        "ite" => {
            if arity == 3 && sorts[0].is_bool() && sorts[1] == sorts[2] {
                ok(sorts[1].clone())
            } else {
                err("`ite` expects (Bool X X)".into())
            }
        }
        // integer / real arithmetic
        "+" | "*" => {
            if arity >= 2 && all_int() {
                ok(S::int())
            } else if arity >= 2 && all_real() {
                ok(S::real())
            } else {
                err(format!("`{op}` expects numeric arguments of one sort"))
            }
        }
        "-" => {
            if arity >= 1 && all_int() {
                ok(S::int())
            } else if arity >= 1 && all_real() {
                ok(S::real())
            } else {
                err("`-` expects numeric arguments of one sort".into())
            }
        }
        "div" | "mod" | "rem" => {
            if arity == 2 && all_int() {
                ok(S::int())
            } else {
                err(format!("`{op}` expects two Int arguments"))
            }
        }
        "abs" => {
            if arity == 1 && all_int() {
                ok(S::int())
            } else {
                err("`abs` expects one Int".into())
            }
        }
        "/" => {
            if arity >= 2 && all_real() {
                ok(S::real())
            } else {
                err("`/` expects Real arguments".into())
            }
        }
        "<" | "<=" | ">" | ">=" => {
            if arity >= 2 && (all_int() || all_real()) {
                ok(S::bool_sort())
            } else {
                err(format!("`{op}` expects numeric arguments of one sort"))
            }
        }
        "to_real" => {
            if arity == 1 && all_int() {
                ok(S::real())
            } else {
                err("`to_real` expects one Int".into())
            }
        }
        "to_int" => {
            if arity == 1 && all_real() {
                ok(S::int())
            } else {
                err("`to_int` expects one Real".into())
            }
        }
        "is_int" => {
            if arity == 1 && all_real() {
                ok(S::bool_sort())
            } else {
                err("`is_int` expects one Real".into())
            }
        }
        // bitvectors
        "bvnot" | "bvneg" => match same_bv() {
            Some(w) if arity == 1 => ok(S::bitvec(w)),
            _ => err(format!("`{op}` expects one bitvector")),
        },
        "bvand" | "bvor" | "bvxor" | "bvadd" | "bvsub" | "bvmul" | "bvnand" | "bvnor"
        | "bvxnor" => match same_bv() {
            Some(w) if arity >= 2 => ok(S::bitvec(w)),
            _ => err(format!("`{op}` expects bitvectors of one width")),
        },
        "bvudiv" | "bvurem" | "bvsdiv" | "bvsrem" | "bvsmod" | "bvshl" | "bvlshr" | "bvashr" => {
            match same_bv() {
                Some(w) if arity == 2 => ok(S::bitvec(w)),
                _ => err(format!("`{op}` expects two bitvectors of one width")),
            }
        }
        "bvcomp" => match same_bv() {
            Some(_) if arity == 2 => ok(S::bitvec(1)),
            _ => err("`bvcomp` expects two bitvectors of one width".into()),
        },
        "concat" => {
            if arity >= 2 {
                let mut total = 0u64;
                for s in &sorts {
                    match s.bitvec_width() {
                        Some(w) => total += w,
                        None => return err("`concat` expects bitvectors".into()),
                    }
                }
                ok(S::bitvec(total))
            } else {
                err("`concat` expects at least two bitvectors".into())
            }
        }
        "bvult" | "bvule" | "bvugt" | "bvuge" | "bvslt" | "bvsle" | "bvsgt" | "bvsge" => {
            match same_bv() {
                Some(_) if arity == 2 => ok(S::bool_sort()),
                _ => err(format!("`{op}` expects two bitvectors of one width")),
            }
        }
        "bv2nat" | "bv2int" | "ubv_to_int" => match same_bv() {
            Some(_) if arity == 1 => ok(S::int()),
            _ => err(format!("`{op}` expects one bitvector")),
        },
        // arrays
        "select" => match sorts.first().and_then(|s| s.array_sorts()) {
            Some((idx, elem)) if arity == 2 && sorts[1] == idx => ok(elem.clone()),
            _ => err("`select` expects (Array I E) and an index".into()),
        },
        "store" => match sorts.first().and_then(|s| s.array_sorts()) {
            Some((idx, elem)) if arity == 3 && sorts[1] == idx && sorts[2] == elem => {
                ok(sorts[0].clone())
            }
            _ => err("`store` expects (Array I E), an index, and an element".into()),
        },
        // strings and regular expressions; the dotted spellings are the
        // pre-2.6 names still common in the wild
        "str.++" => {
            if arity >= 2 && all_string() {
                ok(S::string())
            } else {
                err("`str.++` expects String arguments".into())
            }
        }
        "str.len" => {
            if arity == 1 && all_string() {
                ok(S::int())
            } else {
                err("`str.len` expects one String".into())
            }
        }
        "str.at" => {
            if arity == 2 && sorts[0].is_string() && sorts[1].is_int() {
                ok(S::string())
            } else {
                err("`str.at` expects (String Int)".into())
            }
        }
        "str.substr" => {
            if arity == 3 && sorts[0].is_string() && sorts[1].is_int() && sorts[2].is_int() {
                ok(S::string())
            } else {
                err("`str.substr` expects (String Int Int)".into())
            }
        }
        "str.contains" | "str.prefixof" | "str.suffixof" | "str.<" | "str.<=" => {
            if arity == 2 && all_string() {
                ok(S::bool_sort())
            } else {
                err(format!("`{op}` expects two String arguments"))
            }
        }
        "str.indexof" => {
            if arity == 3 && sorts[0].is_string() && sorts[1].is_string() && sorts[2].is_int() {
                ok(S::int())
            } else {
                err("`str.indexof` expects (String String Int)".into())
            }
        }
        "str.replace" | "str.replace_all" => {
            if arity == 3 && all_string() {
                ok(S::string())
            } else {
                err(format!("`{op}` expects three String arguments"))
            }
        }
        "str.to_int" | "str.to.int" => {
            if arity == 1 && all_string() {
                ok(S::int())
            } else {
                err(format!("`{op}` expects one String"))
            }
        }
        "str.from_int" | "int.to.str" => {
            if arity == 1 && all_int() {
                ok(S::string())
            } else {
                err(format!("`{op}` expects one Int"))
            }
        }
        "str.to_re" | "str.to.re" => {
            if arity == 1 && all_string() {
                ok(S::reglan())
            } else {
                err(format!("`{op}` expects one String"))
            }
        }
        "str.in_re" | "str.in.re" => {
            if arity == 2 && sorts[0].is_string() && sorts[1] == &S::reglan() {
                ok(S::bool_sort())
            } else {
                err(format!("`{op}` expects (String RegLan)"))
            }
        }
        "re.++" | "re.union" | "re.inter" => {
            if arity >= 2 && all_reglan() {
                ok(S::reglan())
            } else {
                err(format!("`{op}` expects RegLan arguments"))
            }
        }
        "re.*" | "re.+" | "re.opt" | "re.comp" => {
            if arity == 1 && all_reglan() {
                ok(S::reglan())
            } else {
                err(format!("`{op}` expects one RegLan"))
            }
        }
        "re.diff" => {
            if arity == 2 && all_reglan() {
                ok(S::reglan())
            } else {
                err("`re.diff` expects two RegLan arguments".into())
            }
        }
        "re.range" => {
            if arity == 2 && all_string() {
                ok(S::reglan())
            } else {
                err("`re.range` expects two String arguments".into())
            }
        }
        _ => None,
    }
}
