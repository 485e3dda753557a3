//! SMT-LIB v2 reading, writing, and term surgery.

pub mod ast;
pub mod fragment;
mod lexer;
pub mod parser;
pub mod printer;
pub mod sexpr;
pub mod subst;

pub use ast::{
    Binder, Command, Constant, Script, Sort, Symbol, Term, TermKind,
};
pub use fragment::enumerate_predicates;
pub use parser::{parse_script, parse_term_with, SymbolTable};
pub use printer::{print_script, print_term};
pub use subst::{expand_lets, strip_annotations, substitute_map};

use crate::error::Result;

/// Depth of a term's tree: leaves count 1, each operator adds a level,
/// annotations are transparent.
pub fn term_depth(t: &Term) -> u32 {
    t.depth()
}

/// Replace free occurrences of `name` in `t` by `value`, renaming binders
/// where needed so nothing is captured.
pub fn substitute(t: &Term, name: &Symbol, value: &Term) -> Term {
    let mut map = std::collections::HashMap::new();
    map.insert(name.clone(), value.clone());
    substitute_map(t, &map)
}

/// Parse a script from a file on disk.
pub fn parse_file(path: &std::path::Path) -> Result<Script> {
    let text = std::fs::read_to_string(path)?;
    parse_script(&text)
}
