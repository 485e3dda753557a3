//! Fragmentation of a formula into its assertable sub-formulas.
//!
//! A subterm qualifies when it is Boolean-sorted and mentions no variable
//! bound by an enclosing quantifier (such a fragment is not a closed
//! formula and cannot be asserted stand-alone). Annotations are stripped
//! first; they carry names, not meaning.

use std::collections::HashSet;

use super::ast::{Symbol, Term, TermKind};
use super::subst::strip_annotations;

/// All assertable sub-formulas of `t` in pre-order, deduplicated
/// structurally, `t` itself first.
pub fn enumerate_predicates(t: &Term) -> Vec<Term> {
    debug_assert!(t.sort().is_bool(), "fragmentation expects a formula");
    let t = strip_annotations(t);
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut bound = Vec::new();
    walk(&t, &mut bound, &mut seen, &mut out);
    out
}

fn walk(
    t: &Term,
    bound: &mut Vec<Symbol>,
    seen: &mut HashSet<Term>,
    out: &mut Vec<Term>,
) {
    if t.sort().is_bool() && !mentions_any(t, bound) && seen.insert(t.clone()) {
        out.push(t.clone());
    }
    match t.kind() {
        TermKind::Const(_) | TermKind::Var(_) => {}
        TermKind::App { args, .. } => {
            for a in args {
                walk(a, bound, seen, out);
            }
        }
        TermKind::Quant {
            bound: vars, body, ..
        } => {
            let depth = bound.len();
            bound.extend(vars.iter().map(|(name, _)| name.clone()));
            walk(body, bound, seen, out);
            bound.truncate(depth);
        }
        // assertions are let-expanded at parse time; if a let does show up,
        // its bound names gate extraction exactly like quantifier binders
        TermKind::Let { bindings, body } => {
            for (_, value) in bindings {
                walk(value, bound, seen, out);
            }
            let depth = bound.len();
            bound.extend(bindings.iter().map(|(name, _)| name.clone()));
            walk(body, bound, seen, out);
            bound.truncate(depth);
        }
        TermKind::Annot { body, .. } => walk(body, bound, seen, out),
    }
}

fn mentions_any(t: &Term, bound: &[Symbol]) -> bool {
    if bound.is_empty() {
        return false;
    }
    let free = t.free_symbols();
    bound.iter().any(|b| free.contains(b))
}
