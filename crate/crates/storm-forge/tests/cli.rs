//! End-to-end runs of the `storm-forge` binary: campaign, artifact tree,
//! standalone re-minimization, mock installation, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_storm-forge")
}

fn oracle() -> PathBuf {
    match std::env::var("STORM_ORACLE") {
        Ok(p) => PathBuf::from(p),
        Err(_) => Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../tools/z3-oracle/target/release/storm-z3"),
    }
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_trigger_seed(dir: &Path) -> PathBuf {
    let p = dir.join("trigger.smt2");
    std::fs::write(
        &p,
        "(set-logic QF_UF)\n\
         (declare-const storm_trigger Bool)\n\
         (declare-const other Bool)\n\
         (assert storm_trigger)\n\
         (assert (or other storm_trigger))\n\
         (check-sat)\n",
    )
    .unwrap();
    p
}

/// One config text for a single solver over a single seed glob.
fn config_text(seeds: &str, out: &Path, solver_bin: &Path, timeout_ms: u64) -> String {
    format!(
        "# generated by the cli test\n\
         [campaign]\n\
         seeds = {seeds}\n\
         out = {}\n\
         rng_seed = 11\n\
         d_max = 16\n\
         a_max = 16\n\
         nc_range = 30..30\n\
         nm_range = 60..60\n\
         workers = 2\n\
         \n\
         [solver target]\n\
         binary = {}\n\
         args = {{file}}\n\
         timeout_ms = {timeout_ms}\n\
         \n\
         [oracle]\n\
         binary = {}\n",
        out.display(),
        solver_bin.display(),
        oracle().display(),
    )
}

#[test]
fn campaign_against_a_buggy_solver_exits_one_with_full_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_trigger_seed(root);

    // plant a soundness hole that two co-occurring trigger mentions set off
    let mock = root.join("buggy-solver");
    let install = run(&[
        "mock",
        "--behavior",
        "unsat-on-trigger:storm_trigger:2:0",
        "--out",
        mock.to_str().unwrap(),
    ]);
    assert!(install.status.success(), "{install:?}");

    let out = root.join("campaign-out");
    let cfg_path = root.join("storm.conf");
    std::fs::write(
        &cfg_path,
        config_text(
            &format!("{}/*.smt2", root.display()),
            &out,
            &mock,
            10_000,
        ),
    )
    .unwrap();

    let r = run(&["run", "--config", cfg_path.to_str().unwrap()]);
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert_eq!(r.status.code(), Some(1), "stdout:\n{stdout}");
    assert!(stdout.contains("class-A bugs: 1"), "{stdout}");

    assert!(out.join("runs.jsonl").is_file());
    assert!(out.join("report.txt").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let bugs = report["bugs"].as_array().unwrap();
    assert_eq!(bugs.len(), 1);
    let bug_id = bugs[0]["id"].as_str().unwrap();
    assert!(bug_id.starts_with("target__trigger__iter"));
    let bug_dir = out.join("bugs").join(bug_id);
    for f in ["report.json", "min.smt2", "trace.json"] {
        assert!(bug_dir.join(f).is_file(), "missing {f}");
    }

    // the minimized instance still sets the mock off
    let replay = Command::new(&mock)
        .arg(bug_dir.join("min.smt2"))
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&replay.stdout).trim(), "unsat");

    // standalone re-minimization from the artifact
    let m = run(&[
        "minimize",
        "--bug",
        bug_dir.join("report.json").to_str().unwrap(),
    ]);
    assert_eq!(m.status.code(), Some(0), "{m:?}");
    assert!(String::from_utf8_lossy(&m.stdout).contains("probes"));
}

#[test]
fn clean_campaign_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    write_trigger_seed(root);
    let out = root.join("out");
    let cfg_path = root.join("storm.conf");
    // /bin/true answers nothing and exits 0... which is a crash verdict;
    // use a wrapper that always answers sat
    let solver = root.join("yes-solver");
    std::fs::write(&solver, "#!/bin/sh\necho sat\n").unwrap();
    use std::os::unix::fs::PermissionsExt;
    std::fs::set_permissions(&solver, std::fs::Permissions::from_mode(0o755)).unwrap();

    std::fs::write(
        &cfg_path,
        config_text(&format!("{}/*.smt2", root.display()), &out, &solver, 10_000),
    )
    .unwrap();

    let r = run(&["run", "--config", cfg_path.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(0), "{r:?}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["bugs"].as_array().unwrap().len(), 0);
    assert_eq!(report["per_solver"]["target"]["instances"].as_u64(), Some(60));
    assert_eq!(report["per_solver"]["target"]["sat"].as_u64(), Some(60));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let missing = run(&["run", "--config", "/nonexistent/storm.conf"]);
    assert_eq!(missing.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.conf");
    std::fs::write(&bad, "[campaign]\nseeds = x.smt2\nbudget = 9\n").unwrap();
    let r = run(&["run", "--config", bad.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 3"), "{err}");

    // --solver naming an id the config does not define
    let seedless = dir.path().join("ok.conf");
    std::fs::write(
        &seedless,
        "[campaign]\nseeds = x.smt2\n\n[solver a]\nbinary = /bin/sh\n",
    )
    .unwrap();
    let r = run(&[
        "run",
        "--config",
        seedless.to_str().unwrap(),
        "--solver",
        "nope",
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn installed_mocks_speak_like_solvers() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let instance = root.join("q.smt2");
    std::fs::write(&instance, "(declare-const p Bool)(assert p)(check-sat)\n").unwrap();

    let cases = [
        ("unknown-always", "unknown"),
        (
            // trigger never fires without the symbol, so this stays honest
            "unsat-on-trigger:absent_symbol:1:0",
            "sat",
        ),
    ];
    for (behavior, expected) in cases {
        let mock = root.join(format!("mock-{expected}"));
        let r = run(&["mock", "--behavior", behavior, "--out", mock.to_str().unwrap()]);
        assert!(r.status.success());
        let ans = Command::new(&mock).arg(&instance).output().unwrap();
        assert_eq!(
            String::from_utf8_lossy(&ans.stdout).trim(),
            expected,
            "{behavior}"
        );
    }

    let bad = run(&["mock", "--behavior", "frobnicate", "--out", "/tmp/x"]);
    assert_eq!(bad.status.code(), Some(2));
}
