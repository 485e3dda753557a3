//! storm-forge: a blackbox mutational fuzzer for SMT solvers.
//!
//! Seed SMT-LIB instances are fragmented into sub-formulas, each sub-formula
//! is assigned a truth value under a concrete variable assignment produced
//! by a trusted oracle solver, and new instances are recombined from those
//! valuated pieces so that every generated instance is satisfiable by
//! construction. Any solver under test answering `unsat` has a soundness
//! bug; such instances are then shrunk by binary search over the generation
//! bounds.

pub mod campaign;
pub mod config;
pub mod error;
pub mod instance;
pub mod minimize;
pub mod mock;
pub mod oracle;
pub mod runner;
pub mod smtlib;
pub mod pools;
pub mod truth;
pub mod util;

pub use error::{Error, Result};
