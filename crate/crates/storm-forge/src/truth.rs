//! Truth-table evaluation of Boolean skeletons without a solver.
//!
//! Instances are stitched together from pooled formulas whose truth values
//! under the campaign assignment are already known. Their satisfiability can
//! therefore be decided by plain three-valued recursion over the Boolean
//! connectives, treating pooled terms as opaque atoms. This is the
//! independent check the acceptance suite uses against the solver-backed
//! path.

use std::collections::HashMap;

use crate::error::Result;
use crate::oracle::{PredicateEvaluator, TruthValue};
use crate::smtlib::ast::{Term, TermKind};
use crate::smtlib::subst::expand_lets;

/// Evaluator over a fixed table of known subformula truths. Lookup first
/// (so pooled non-Boolean-structure atoms and quantified formulas resolve),
/// then structural recursion through and/or/not/xor/=>/ite/=/distinct.
/// Anything else is UNDETERMINED, never an error.
#[derive(Clone, Debug, Default)]
pub struct LocalEvaluator {
    atoms: HashMap<Term, TruthValue>,
}

impl LocalEvaluator {
    pub fn new() -> LocalEvaluator {
        LocalEvaluator::default()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (Term, TruthValue)>) -> LocalEvaluator {
        LocalEvaluator {
            atoms: entries.into_iter().collect(),
        }
    }

    pub fn set(&mut self, atom: Term, value: TruthValue) {
        self.atoms.insert(atom, value);
    }

    pub fn truth(&self, t: &Term) -> TruthValue {
        if let Some(v) = self.atoms.get(t) {
            return *v;
        }
        match t.kind() {
            TermKind::Const(c) => match c {
                crate::smtlib::ast::Constant::Bool(b) => TruthValue::from_bool(*b),
                _ => TruthValue::Undetermined,
            },
            TermKind::App {
                op,
                indices,
                qual,
                args,
            } if indices.is_empty() && qual.is_none() => {
                self.connective(op.as_str(), args)
            }
            TermKind::Annot { body, .. } => self.truth(body),
            TermKind::Let { .. } => {
                // lets are normally expanded before terms reach a pool
                match expand_lets(t, t.node_count().saturating_mul(10).max(10_000)) {
                    Ok(expanded) => self.truth(&expanded),
                    Err(_) => TruthValue::Undetermined,
                }
            }
            _ => TruthValue::Undetermined,
        }
    }

    fn connective(&self, op: &str, args: &[Term]) -> TruthValue {
        match op {
            "not" if args.len() == 1 => self.truth(&args[0]).negate(),
            "and" => {
                let mut acc = TruthValue::True;
                for a in args {
                    acc = acc.and(self.truth(a));
                    if acc == TruthValue::False {
                        return TruthValue::False;
                    }
                }
                acc
            }
            "or" => {
                let mut acc = TruthValue::False;
                for a in args {
                    acc = acc.or(self.truth(a));
                    if acc == TruthValue::True {
                        return TruthValue::True;
                    }
                }
                acc
            }
            "xor" if !args.is_empty() => {
                let mut parity = false;
                for a in args {
                    match self.truth(a).as_bool() {
                        Some(b) => parity ^= b,
                        None => return TruthValue::Undetermined,
                    }
                }
                TruthValue::from_bool(parity)
            }
            "=>" if args.len() >= 2 => {
                // right-associative chain: (=> a b c) = a -> (b -> c)
                let mut acc = self.truth(args.last().expect("len checked"));
                for a in args[..args.len() - 1].iter().rev() {
                    acc = self.truth(a).negate().or(acc);
                }
                acc
            }
            "ite" if args.len() == 3 => match self.truth(&args[0]) {
                TruthValue::True => self.truth(&args[1]),
                TruthValue::False => self.truth(&args[2]),
                TruthValue::Undetermined => {
                    let t = self.truth(&args[1]);
                    let e = self.truth(&args[2]);
                    if t == e {
                        t
                    } else {
                        TruthValue::Undetermined
                    }
                }
            },
            "=" if args.len() >= 2 && args.iter().all(|a| a.sort().is_bool()) => {
                let values: Vec<TruthValue> = args.iter().map(|a| self.truth(a)).collect();
                if values
                    .windows(2)
                    .any(|w| w[0].as_bool().zip(w[1].as_bool()).is_some_and(|(a, b)| a != b))
                {
                    return TruthValue::False;
                }
                if values.iter().all(|v| v.as_bool().is_some()) {
                    TruthValue::True
                } else {
                    TruthValue::Undetermined
                }
            }
            "distinct" if args.len() >= 2 && args.iter().all(|a| a.sort().is_bool()) => {
                if args.len() > 2 {
                    // only two Boolean values exist
                    return TruthValue::False;
                }
                match (self.truth(&args[0]).as_bool(), self.truth(&args[1]).as_bool()) {
                    (Some(a), Some(b)) => TruthValue::from_bool(a != b),
                    _ => TruthValue::Undetermined,
                }
            }
            _ => TruthValue::Undetermined,
        }
    }
}

impl PredicateEvaluator for LocalEvaluator {
    fn evaluate_all(&mut self, preds: &[Term]) -> Result<Vec<TruthValue>> {
        Ok(preds.iter().map(|p| self.truth(p)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smtlib::ast::{Sort, Symbol};
    use crate::smtlib::{parse_script, parse_term_with, SymbolTable};

    fn bools(names: &[&str]) -> SymbolTable {
        let script = names
            .iter()
            .map(|n| format!("(declare-const {n} Bool)"))
            .collect::<String>();
        SymbolTable::from_script(&parse_script(&script).unwrap())
    }

    fn term(table: &SymbolTable, text: &str) -> Term {
        let sx = crate::smtlib::sexpr::parse_sexprs(text).unwrap().remove(0);
        parse_term_with(table, false, &sx).unwrap()
    }

    fn atom(name: &str) -> Term {
        Term::var(Symbol::new(name), Sort::bool_sort())
    }

    fn eval_with(assign: &[(&str, bool)], table: &SymbolTable, text: &str) -> TruthValue {
        let e = LocalEvaluator::from_entries(
            assign
                .iter()
                .map(|(n, b)| (atom(n), TruthValue::from_bool(*b))),
        );
        e.truth(&term(table, text))
    }

    #[test]
    fn plain_connectives() {
        let t = bools(&["a", "b", "c"]);
        let a = [("a", false), ("b", true), ("c", true)];
        assert_eq!(eval_with(&a, &t, "(or a b)"), TruthValue::True);
        assert_eq!(eval_with(&a, &t, "(and a b)"), TruthValue::False);
        assert_eq!(eval_with(&a, &t, "(not a)"), TruthValue::True);
        assert_eq!(eval_with(&a, &t, "(xor a b c)"), TruthValue::False);
        assert_eq!(eval_with(&a, &t, "(=> b c a)"), TruthValue::False);
        assert_eq!(eval_with(&a, &t, "(=> a b)"), TruthValue::True);
        assert_eq!(eval_with(&a, &t, "(ite b c a)"), TruthValue::True);
        assert_eq!(eval_with(&a, &t, "(= b c)"), TruthValue::True);
        assert_eq!(eval_with(&a, &t, "(= a b)"), TruthValue::False);
        assert_eq!(eval_with(&a, &t, "(distinct a b)"), TruthValue::True);
        assert_eq!(eval_with(&a, &t, "(distinct a b c)"), TruthValue::False);
        assert_eq!(eval_with(&a, &t, "true"), TruthValue::True);
        assert_eq!(eval_with(&a, &t, "(and b true)"), TruthValue::True);
    }

    #[test]
    fn undetermined_propagation_and_short_circuits() {
        let t = bools(&["a", "b"]);
        // only a is known
        let e = LocalEvaluator::from_entries([(atom("a"), TruthValue::True)]);
        assert_eq!(e.truth(&term(&t, "(or a b)")), TruthValue::True);
        assert_eq!(e.truth(&term(&t, "(and a b)")), TruthValue::Undetermined);
        assert_eq!(e.truth(&term(&t, "(and (not a) b)")), TruthValue::False);
        assert_eq!(e.truth(&term(&t, "(=> b a)")), TruthValue::True);
        assert_eq!(e.truth(&term(&t, "(ite b a a)")), TruthValue::True);
        assert_eq!(e.truth(&term(&t, "b")), TruthValue::Undetermined);
    }

    #[test]
    fn non_boolean_atoms_resolve_by_lookup() {
        let s = parse_script(
            "(declare-const x Int)(declare-const p Bool)(assert (and (> x 3) p))(check-sat)",
        )
        .unwrap();
        let conj = s.assertions()[0].clone();
        let gt = match conj.kind() {
            TermKind::App { args, .. } => args[0].clone(),
            _ => unreachable!(),
        };
        let mut e = LocalEvaluator::new();
        e.set(gt, TruthValue::True);
        e.set(atom("p"), TruthValue::True);
        assert_eq!(e.truth(&conj), TruthValue::True);
        // the raw inequality with no table entry stays open
        assert_eq!(
            LocalEvaluator::new().truth(&conj),
            TruthValue::Undetermined
        );
    }

    #[test]
    fn whole_term_lookup_wins_over_recursion() {
        let t = bools(&["q"]);
        let quant = term(&t, "(and q q)");
        let mut e = LocalEvaluator::new();
        e.set(quant.clone(), TruthValue::False);
        assert_eq!(e.truth(&quant), TruthValue::False);
    }

    #[test]
    fn matches_two_valued_semantics_exhaustively() {
        // every skeleton over 2 atoms x all 4 assignments, checked against
        // direct bool arithmetic
        let t = bools(&["a", "b"]);
        let skeletons = [
            "(and a b)",
            "(or a b)",
            "(xor a b)",
            "(=> a b)",
            "(= a b)",
            "(distinct a b)",
            "(not (and a (not b)))",
            "(ite a b (not b))",
            "(or (and a b) (and (not a) (not b)))",
        ];
        let expect: [fn(bool, bool) -> bool; 9] = [
            |a, b| a && b,
            |a, b| a || b,
            |a, b| a ^ b,
            |a, b| !a || b,
            |a, b| a == b,
            |a, b| a != b,
            |a, b| !(a && !b),
            |a, b| if a { b } else { !b },
            |a, b| (a && b) || (!a && !b),
        ];
        for (text, f) in skeletons.iter().zip(expect.iter()) {
            for bits in 0..4u8 {
                let (a, b) = (bits & 1 != 0, bits & 2 != 0);
                let got = eval_with(&[("a", a), ("b", b)], &t, text);
                assert_eq!(got, TruthValue::from_bool(f(a, b)), "{text} a={a} b={b}");
            }
        }
    }
}
