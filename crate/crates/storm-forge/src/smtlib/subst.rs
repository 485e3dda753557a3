//! Capture-avoiding substitution and the term rewrites built on it:
//! let expansion, defined-function inlining, annotation stripping.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};

use super::ast::{Symbol, Term, TermKind};

/// Substitute `map` into `t`, renaming quantifier binders where they would
/// capture a free symbol of a substituted value.
pub fn substitute_map(t: &Term, map: &HashMap<Symbol, Term>) -> Term {
    if map.is_empty() {
        return t.clone();
    }
    let mut values_free: HashSet<Symbol> = HashSet::new();
    for v in map.values() {
        values_free.extend(v.free_symbols());
    }
    walk(t, map, &values_free)
}

fn walk(t: &Term, map: &HashMap<Symbol, Term>, values_free: &HashSet<Symbol>) -> Term {
    match t.kind() {
        TermKind::Const(_) => t.clone(),
        TermKind::Var(s) => match map.get(s) {
            Some(v) => v.clone(),
            None => t.clone(),
        },
        TermKind::App {
            op,
            indices,
            qual,
            args,
        } => {
            let new_args: Vec<Term> = args.iter().map(|a| walk(a, map, values_free)).collect();
            if new_args.iter().zip(args).all(|(n, o)| n.ptr_eq(o)) {
                return t.clone();
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
            // bound names shadow the substitution
            let mut inner: HashMap<Symbol, Term> = map
                .iter()
                .filter(|(k, _)| !bound.iter().any(|(b, _)| b == *k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            if inner.is_empty() {
                return t.clone();
            }
            // rename binders that would capture a free symbol of a value
            let mut new_bound = bound.clone();
            let mut renames: HashMap<Symbol, Term> = HashMap::new();
            for (name, sort) in new_bound.iter_mut() {
                if values_free.contains(name) {
                    let fresh = fresh_name(name, values_free, &renames);
                    renames.insert(name.clone(), Term::var(fresh.clone(), sort.clone()));
                    *name = fresh;
                }
            }
            let body = if renames.is_empty() {
                body.clone()
            } else {
                let rename_free: HashSet<Symbol> = renames
                    .values()
                    .flat_map(|v| v.free_symbols())
                    .collect();
                walk(body, &renames, &rename_free)
            };
            inner.retain(|k, _| !new_bound.iter().any(|(b, _)| b == k));
            let new_body = walk(&body, &inner, values_free);
            Term::quant(*binder, new_bound, new_body)
        }
        TermKind::Let { bindings, body } => {
            // lets are normally expanded before substitution runs; handle
            // them anyway for completeness
            let new_bindings: Vec<(Symbol, Term)> = bindings
                .iter()
                .map(|(s, v)| (s.clone(), walk(v, map, values_free)))
                .collect();
            let inner: HashMap<Symbol, Term> = map
                .iter()
                .filter(|(k, _)| !bindings.iter().any(|(b, _)| b == *k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let new_body = if inner.is_empty() {
                body.clone()
            } else {
                walk(body, &inner, values_free)
            };
            Term::let_(new_bindings, new_body)
        }
        TermKind::Annot { body, attrs } => {
            let new_body = walk(body, map, values_free);
            if new_body.ptr_eq(body) {
                t.clone()
            } else {
                Term::annot(new_body, attrs.clone())
            }
        }
    }
}

fn fresh_name(
    base: &Symbol,
    avoid: &HashSet<Symbol>,
    taken: &HashMap<Symbol, Term>,
) -> Symbol {
    for i in 1u32.. {
        let candidate = Symbol::new(format!("{base}!{i}"));
        if !avoid.contains(&candidate) && !taken.contains_key(&candidate) {
            return candidate;
        }
    }
    unreachable!()
}

/// Expand every let binding in `t`. `cap` bounds the logical node count of
/// the result; exceeding it aborts with an unsupported-construct error so a
/// pathological seed is skipped instead of exhausting memory.
pub fn expand_lets(t: &Term, cap: u64) -> Result<Term> {
    let expanded = expand_lets_inner(t);
    if expanded.node_count() > cap {
        return Err(Error::Unsupported(format!(
            "let expansion grows the term past the {cap}-node cap"
        )));
    }
    Ok(expanded)
}

fn expand_lets_inner(t: &Term) -> Term {
    match t.kind() {
        TermKind::Const(_) | TermKind::Var(_) => t.clone(),
        TermKind::App {
            op,
            indices,
            qual,
            args,
        } => {
            let new_args: Vec<Term> = args.iter().map(expand_lets_inner).collect();
            if new_args.iter().zip(args).all(|(n, o)| n.ptr_eq(o)) {
                t.clone()
            } else {
                Term::app(
                    op.clone(),
                    indices.clone(),
                    qual.clone(),
                    new_args,
                    t.sort().clone(),
                )
            }
        }
        TermKind::Quant {
            binder,
            bound,
            body,
        } => {
            let new_body = expand_lets_inner(body);
            if new_body.ptr_eq(body) {
                t.clone()
            } else {
                Term::quant(*binder, bound.clone(), new_body)
            }
        }
        TermKind::Let { bindings, body } => {
            // parallel let: values see the outer scope only
            let map: HashMap<Symbol, Term> = bindings
                .iter()
                .map(|(s, v)| (s.clone(), expand_lets_inner(v)))
                .collect();
            let body = expand_lets_inner(body);
            substitute_map(&body, &map)
        }
        TermKind::Annot { body, attrs } => {
            let new_body = expand_lets_inner(body);
            if new_body.ptr_eq(body) {
                t.clone()
            } else {
                Term::annot(new_body, attrs.clone())
            }
        }
    }
}

/// Remove every annotation node, keeping the annotated bodies.
pub fn strip_annotations(t: &Term) -> Term {
    match t.kind() {
        TermKind::Const(_) | TermKind::Var(_) => t.clone(),
        TermKind::App {
            op,
            indices,
            qual,
            args,
        } => {
            let new_args: Vec<Term> = args.iter().map(strip_annotations).collect();
            if new_args.iter().zip(args).all(|(n, o)| n.ptr_eq(o)) {
                t.clone()
            } else {
                Term::app(
                    op.clone(),
                    indices.clone(),
                    qual.clone(),
                    new_args,
                    t.sort().clone(),
                )
            }
        }
        TermKind::Quant {
            binder,
            bound,
            body,
        } => {
            let new_body = strip_annotations(body);
            if new_body.ptr_eq(body) {
                t.clone()
            } else {
                Term::quant(*binder, bound.clone(), new_body)
            }
        }
        TermKind::Let { bindings, body } => Term::let_(
            bindings
                .iter()
                .map(|(s, v)| (s.clone(), strip_annotations(v)))
                .collect(),
            strip_annotations(body),
        ),
        TermKind::Annot { body, .. } => strip_annotations(body),
    }
}
