//! Canonical SMT-LIB text output: one command per line, single spaces,
//! no indentation. Reparsing printed output yields an equal script.

use std::fmt::Write;

use super::ast::{
    Binder, Command, Constant, Index, Script, Sort, SortArg, Symbol, Term, TermKind,
};
use super::lexer::is_simple_symbol;
use super::sexpr::SExpr;

pub fn print_script(script: &Script) -> String {
    let mut out = String::new();
    for cmd in &script.commands {
        print_command(&mut out, cmd);
        out.push('\n');
    }
    out
}

pub fn print_command(out: &mut String, cmd: &Command) {
    match cmd {
        Command::SetLogic(l) => {
            out.push_str("(set-logic ");
            push_symbol(out, l);
            out.push(')');
        }
        Command::DeclareConst { name, sort } => {
            out.push_str("(declare-const ");
            push_symbol(out, name);
            out.push(' ');
            push_sort(out, sort);
            out.push(')');
        }
        Command::DeclareFun { name, params, ret } => {
            out.push_str("(declare-fun ");
            push_symbol(out, name);
            out.push_str(" (");
            for (i, p) in params.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                push_sort(out, p);
            }
            out.push_str(") ");
            push_sort(out, ret);
            out.push(')');
        }
        Command::DeclareSort { name, arity } => {
            out.push_str("(declare-sort ");
            push_symbol(out, name);
            let _ = write!(out, " {arity})");
        }
        Command::DeclareDatatypes(decls) => {
            out.push_str("(declare-datatypes (");
            for (i, d) in decls.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push('(');
                push_symbol(out, &d.name);
                out.push_str(" 0)");
            }
            out.push_str(") (");
            for (i, d) in decls.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push('(');
                for (j, ctor) in d.constructors.iter().enumerate() {
                    if j > 0 {
                        out.push(' ');
                    }
                    out.push('(');
                    push_symbol(out, &ctor.name);
                    for (sel, sort) in &ctor.selectors {
                        out.push_str(" (");
                        push_symbol(out, sel);
                        out.push(' ');
                        push_sort(out, sort);
                        out.push(')');
                    }
                    out.push(')');
                }
                out.push(')');
            }
            out.push_str("))");
        }
        Command::DefineFun {
            name,
            params,
            ret,
            body,
        } => {
            out.push_str("(define-fun ");
            push_symbol(out, name);
            out.push_str(" (");
            for (i, (p, s)) in params.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push('(');
                push_symbol(out, p);
                out.push(' ');
                push_sort(out, s);
                out.push(')');
            }
            out.push_str(") ");
            push_sort(out, ret);
            out.push(' ');
            push_term(out, body);
            out.push(')');
        }
        Command::Assert(t) => {
            out.push_str("(assert ");
            push_term(out, t);
            out.push(')');
        }
        Command::CheckSat => out.push_str("(check-sat)"),
        Command::CheckSatUsing(sx) => push_sexpr(out, sx),
        Command::Push(n) => {
            let _ = write!(out, "(push {n})");
        }
        Command::Pop(n) => {
            let _ = write!(out, "(pop {n})");
        }
        Command::GetModel => out.push_str("(get-model)"),
        Command::Exit => out.push_str("(exit)"),
        Command::Passthrough(sx) => push_sexpr(out, sx),
    }
}

pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    push_term(&mut out, t);
    out
}

pub fn print_sort(s: &Sort) -> String {
    let mut out = String::new();
    push_sort(&mut out, s);
    out
}

fn push_symbol(out: &mut String, sym: &Symbol) {
    let name = sym.as_str();
    if is_simple_symbol(name) {
        out.push_str(name);
    } else {
        out.push('|');
        out.push_str(name);
        out.push('|');
    }
}

fn push_sort(out: &mut String, sort: &Sort) {
    if sort.args.is_empty() {
        push_symbol(out, &sort.name);
        return;
    }
    // indexed sorts reprint through (_ Name idx...), parametric ones
    // through (Name arg...)
    let indexed = sort.args.iter().any(|a| matches!(a, SortArg::Num(_)));
    out.push('(');
    if indexed {
        out.push_str("_ ");
    }
    push_symbol(out, &sort.name);
    for a in &sort.args {
        out.push(' ');
        match a {
            SortArg::Sort(s) => push_sort(out, s),
            SortArg::Num(n) => {
                let _ = write!(out, "{n}");
            }
        }
    }
    out.push(')');
}

fn push_constant(out: &mut String, c: &Constant) {
    match c {
        Constant::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Constant::Numeral(n) | Constant::Decimal(n) => out.push_str(n),
        Constant::Hex(h) => {
            out.push_str("#x");
            out.push_str(h);
        }
        Constant::Bin(b) => {
            out.push_str("#b");
            out.push_str(b);
        }
        Constant::Str(s) => {
            out.push('"');
            for ch in s.chars() {
                if ch == '"' {
                    out.push_str("\"\"");
                } else {
                    out.push(ch);
                }
            }
            out.push('"');
        }
        Constant::BvNum { value, width } => {
            let _ = write!(out, "(_ bv{value} {width})");
        }
    }
}

fn push_term(out: &mut String, t: &Term) {
    match t.kind() {
        TermKind::Const(c) => push_constant(out, c),
        TermKind::Var(name) => push_symbol(out, name),
        TermKind::App {
            op,
            indices,
            qual,
            args,
        } => {
            if indices.is_empty() && qual.is_none() && args.is_empty() {
                push_symbol(out, op);
                return;
            }
            if args.is_empty() {
                if let Some(sort) = qual {
                    // bare qualified identifier: (as nil (Lst Int))
                    out.push_str("(as ");
                    push_symbol(out, op);
                    out.push(' ');
                    push_sort(out, sort);
                    out.push(')');
                    return;
                }
            }
            out.push('(');
            if !indices.is_empty() {
                out.push_str("(_ ");
                push_symbol(out, op);
                for idx in indices {
                    out.push(' ');
                    match idx {
                        Index::Num(n) => {
                            let _ = write!(out, "{n}");
                        }
                        Index::Sym(s) => push_symbol(out, s),
                    }
                }
                out.push(')');
            } else if let Some(sort) = qual {
                out.push_str("(as ");
                push_symbol(out, op);
                out.push(' ');
                push_sort(out, sort);
                out.push(')');
            } else {
                push_symbol(out, op);
            }
            for a in args {
                out.push(' ');
                push_term(out, a);
            }
            out.push(')');
        }
        TermKind::Quant {
            binder,
            bound,
            body,
        } => {
            out.push_str(match binder {
                Binder::Forall => "(forall (",
                Binder::Exists => "(exists (",
            });
            for (i, (name, sort)) in bound.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push('(');
                push_symbol(out, name);
                out.push(' ');
                push_sort(out, sort);
                out.push(')');
            }
            out.push_str(") ");
            push_term(out, body);
            out.push(')');
        }
        TermKind::Let { bindings, body } => {
            out.push_str("(let (");
            for (i, (name, value)) in bindings.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push('(');
                push_symbol(out, name);
                out.push(' ');
                push_term(out, value);
                out.push(')');
            }
            out.push_str(") ");
            push_term(out, body);
            out.push(')');
        }
        TermKind::Annot { body, attrs } => {
            out.push_str("(! ");
            push_term(out, body);
            for attr in attrs {
                out.push(' ');
                out.push_str(&attr.key);
                if let Some(v) = &attr.value {
                    out.push(' ');
                    push_sexpr(out, v);
                }
            }
            out.push(')');
        }
    }
}

fn push_sexpr(out: &mut String, sx: &SExpr) {
    let _ = write!(out, "{sx}");
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_script;
    use super::*;

    fn roundtrip(text: &str) {
        let first = parse_script(text).unwrap();
        let printed = print_script(&first);
        let second = parse_script(&printed).unwrap_or_else(|e| {
            panic!("reparse failed: {e}\n--- printed ---\n{printed}")
        });
        assert_eq!(first, second, "--- printed ---\n{printed}");
        // printing is a fixpoint after one normalization pass
        assert_eq!(printed, print_script(&second));
    }

    #[test]
    fn roundtrip_core_script() {
        roundtrip(concat!(
            "(set-logic QF_UF)",
            "(declare-const p Bool)",
            "(declare-fun f (Bool Bool) Bool)",
            "(assert (f p (not p)))",
            "(check-sat)",
            "(exit)"
        ));
    }

    #[test]
    fn roundtrip_arith_and_annotations() {
        roundtrip(concat!(
            "(set-logic QF_LIA)",
            "(declare-const x Int)",
            "(assert (! (>= (+ x 1) (- 2)) :named a0))",
            "(check-sat)"
        ));
    }

    #[test]
    fn roundtrip_bitvectors() {
        roundtrip(concat!(
            "(set-logic QF_BV)",
            "(declare-const v (_ BitVec 8))",
            "(assert (= ((_ extract 3 0) v) #xa))",
            "(assert (bvult v (_ bv200 8)))",
            "(check-sat)"
        ));
    }

    #[test]
    fn roundtrip_strings() {
        roundtrip(concat!(
            "(set-logic QF_S)",
            "(declare-const s String)",
            "(assert (str.in_re s (re.+ (re.range \"a\" \"z\"))))",
            "(assert (= s \"he said \"\"hi\"\"\"))",
            "(check-sat)"
        ));
    }

    #[test]
    fn roundtrip_quoted_symbols() {
        roundtrip(concat!(
            "(declare-const |odd name| Bool)",
            "(assert |odd name|)",
            "(check-sat)"
        ));
    }

    #[test]
    fn roundtrip_quantifiers_and_arrays() {
        roundtrip(concat!(
            "(set-logic AUFLIA)",
            "(declare-const a (Array Int Int))",
            "(assert (forall ((i Int)) (<= (select a i) (select (store a i 0) i))))",
            "(check-sat)"
        ));
    }

    #[test]
    fn roundtrip_datatypes() {
        roundtrip(concat!(
            "(declare-datatypes ((Pair 0)) (((mk (fst Int) (snd Int)))))",
            "(declare-const p Pair)",
            "(assert ((_ is mk) p))",
            "(assert (= (fst p) 3))",
            "(check-sat)"
        ));
    }

    #[test]
    fn roundtrip_passthrough_commands() {
        roundtrip(concat!(
            "(set-option :produce-models true)",
            "(set-info :status sat)",
            "(declare-const p Bool)",
            "(assert p)",
            "(check-sat)",
            "(get-model)"
        ));
    }

    #[test]
    fn roundtrip_push_pop_incremental() {
        roundtrip(concat!(
            "(declare-const p Bool)",
            "(push 1)(assert p)(check-sat)",
            "(push 2)(assert (not p))(check-sat)(pop 2)",
            "(check-sat)(pop 1)"
        ));
    }

    #[test]
    fn const_array_prints_with_qualifier() {
        let s = parse_script(concat!(
            "(declare-const a (Array Int Bool))",
            "(assert (select ((as const (Array Int Bool)) false) 0))"
        ))
        .unwrap();
        let text = print_script(&s);
        assert!(text.contains("((as const (Array Int Bool)) false)"), "{text}");
        roundtrip(&text);
    }
}
