//! The bundled seed corpus: every file must parse, print, and reparse to
//! the same tree, and the stated `:status` must agree with the trusted
//! solver.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use storm_forge::oracle::OracleClient;
use storm_forge::runner::Verdict;
use storm_forge::smtlib::{parse_file, parse_script, print_script};

fn corpus_files() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .expect("corpus directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "smt2"))
        .collect();
    files.sort();
    files
}

fn oracle() -> OracleClient {
    let explicit = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../tools/z3-oracle/target/release/storm-z3");
    OracleClient::locate(Some(&explicit), Duration::from_millis(8_000)).expect("oracle binary")
}

#[test]
fn corpus_is_large_and_diverse() {
    let files = corpus_files();
    assert!(files.len() >= 50, "only {} corpus files", files.len());

    let mut logics = BTreeSet::new();
    let mut quantified = 0;
    let mut with_strings = 0;
    let mut with_bv = 0;
    for f in &files {
        let s = parse_file(f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        if let Some(l) = s.logic() {
            logics.insert(l.to_string());
        }
        let text = s.to_text();
        if text.contains("forall") || text.contains("exists") {
            quantified += 1;
        }
        if text.contains("String") {
            with_strings += 1;
        }
        if text.contains("BitVec") {
            with_bv += 1;
        }
    }
    assert!(logics.len() >= 10, "logics: {logics:?}");
    assert!(quantified >= 3, "quantified files: {quantified}");
    assert!(with_strings >= 4, "string files: {with_strings}");
    assert!(with_bv >= 6, "bitvector files: {with_bv}");
}

#[test]
fn every_corpus_file_round_trips() {
    let mut checked = 0;
    for f in corpus_files() {
        let s1 = parse_file(&f).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        let t1 = print_script(&s1);
        let s2 = parse_script(&t1).unwrap_or_else(|e| panic!("{} (reprinted): {e}", f.display()));
        assert_eq!(s1, s2, "{} changed across print/parse", f.display());
        assert_eq!(t1, print_script(&s2), "{} print not a fixpoint", f.display());
        checked += 1;
    }
    assert!(checked >= 50);
}

#[test]
fn stated_statuses_agree_with_the_trusted_solver() {
    let client = oracle();
    for f in corpus_files() {
        let text = std::fs::read_to_string(&f).unwrap();
        let expected = if text.contains(":status unsat") {
            Verdict::Unsat
        } else {
            // everything else in the corpus is satisfiable by design
            Verdict::Sat
        };
        let got = client
            .check_ground_truth(&text)
            .unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert_eq!(got, expected, "{}", f.display());
    }
}
