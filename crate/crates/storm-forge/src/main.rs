//! Command line front end.
//!
//! Exit codes: 0 when the campaign ran clean, 1 when any bug or suspicious
//! observation was recorded, 2 for configuration and usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use storm_forge::campaign::{minimize_bug_artifact, run_campaign};
use storm_forge::config::{CampaignConfig, Overrides};
use storm_forge::error::Error;
use storm_forge::mock::{self, MockBehavior};

#[derive(Parser)]
#[command(
    name = "storm-forge",
    about = "Mutational fuzzer that hunts soundness bugs in SMT solvers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a fuzzing campaign described by a config file
    Run {
        /// campaign config file
        #[arg(long)]
        config: PathBuf,
        /// replace the configured seed patterns with one glob
        #[arg(long)]
        seeds: Option<String>,
        /// keep only the solver with this id
        #[arg(long)]
        solver: Option<String>,
        /// master rng seed override
        #[arg(long)]
        seed: Option<u64>,
        /// exercise the incremental (push/pop) instance shape
        #[arg(long)]
        incremental: bool,
        /// worker thread count override
        #[arg(long)]
        workers: Option<usize>,
        /// output directory override
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run minimization for a recorded bug
    Minimize {
        /// path to a bugs/<id>/report.json artifact
        #[arg(long)]
        bug: PathBuf,
    },
    /// Install a scripted solver double for harness testing
    Mock {
        /// behavior spec, e.g. unsat-on-trigger:<symbol>:<asserts>:<depth>,
        /// crash-on-trigger:..., unknown-always, sleep-forever,
        /// honest-forward[:path]
        #[arg(long)]
        behavior: MockBehavior,
        /// where to write the executable wrapper
        #[arg(long)]
        out: PathBuf,
    },
    /// (internal) answer one instance with a scripted behavior
    #[command(hide = true)]
    MockServe {
        #[arg(long)]
        behavior: MockBehavior,
        /// instance file; stdin when omitted
        instance: Option<PathBuf>,
    },
}

fn run(cmd: Cmd) -> Result<u8, Error> {
    match cmd {
        Cmd::Run {
            config,
            seeds,
            solver,
            seed,
            incremental,
            workers,
            out,
        } => {
            let mut cfg = CampaignConfig::load(&config)?;
            cfg.apply_overrides(&Overrides {
                seeds,
                solver,
                rng_seed: seed,
                incremental,
                workers,
                out,
            })?;
            let report = run_campaign(&cfg)?;
            print!("{}", report.render_text());
            println!(
                "artifacts under {} (runs.jsonl, report.json, report.txt, bugs/)",
                cfg.out_dir.display()
            );
            Ok(if report.any_bug() { 1 } else { 0 })
        }
        Cmd::Minimize { bug } => {
            let (artifact, trace) = minimize_bug_artifact(&bug)?;
            let m = artifact
                .minimization
                .expect("minimize always records a summary");
            println!(
                "{}: {}B/{} asserts/depth {} -> {}B/{} asserts/depth {} in {} probes ({} stages)",
                artifact.id,
                m.original.bytes,
                m.original.asserts,
                m.original.depth,
                m.minimized.bytes,
                m.minimized.asserts,
                m.minimized.depth,
                m.fuzz_calls,
                trace.len(),
            );
            if !m.reproducible {
                eprintln!(
                    "warning: the final instance no longer reproduces; kept the last one that did"
                );
            }
            Ok(0)
        }
        Cmd::Mock { behavior, out } => {
            let self_exe = std::env::current_exe()?;
            mock::install(&behavior, &out, &self_exe)?;
            println!("installed `{behavior}` mock at {}", out.display());
            Ok(0)
        }
        Cmd::MockServe { behavior, instance } => {
            let code = mock::serve_main(&behavior, instance.as_deref())?;
            Ok(code.clamp(0, 255) as u8)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            // anything that stops the run before results is a usage or
            // environment problem
            eprintln!("storm-forge: {e}");
            ExitCode::from(2)
        }
    }
}
