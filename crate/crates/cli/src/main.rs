//! `mis`: command-line front end for the movable intelligent surface solver.

mod commands;
mod config;
mod error;
mod output;
mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{Command, Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "mis", version, about = "Max-min SNR design for movable intelligent surfaces")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Flat JSON config, or a manifest from a previous run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one arc scenario.
    Solve,
    /// Gain of every MS 2 size over the single-layer surface.
    SweepMs2,
    /// Element allocation between MS 1 and MS 2 under a fixed total.
    SweepAlloc,
    /// Worst-case SNR versus user count for 1D and 2D surfaces.
    SweepUsers,
    /// Per-pattern, per-user SNR tables for the small case studies.
    CaseStudy {
        #[arg(long, value_parser = clap::value_parser!(u8).range(6..=7))]
        figure: Option<u8>,
    },
    /// Brute-force optimality and finite-difference gradient checks.
    OracleCheck,
    /// Invariant suite.
    Selftest,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (command, figure) = match cli.command {
        Cmd::Solve => (Command::Solve, None),
        Cmd::SweepMs2 => (Command::SweepMs2, None),
        Cmd::SweepAlloc => (Command::SweepAlloc, None),
        Cmd::SweepUsers => (Command::SweepUsers, None),
        Cmd::CaseStudy { figure } => (Command::CaseStudy, figure),
        Cmd::OracleCheck => (Command::OracleCheck, None),
        Cmd::Selftest => (Command::Selftest, None),
    };
    let c = cli.common;
    let file = match &c.config {
        Some(path) => config::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: c.seed,
        restarts: c.restarts,
        out: c.out,
        figure,
    };
    let cfg = file.resolve(command, &overrides)?;

    if let Some(jobs) = c.jobs {
        if jobs == 0 {
            return Err(CliError::Validation("invalid `jobs`: must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }

    let outcome = match command {
        Command::Solve => commands::solve(&cfg),
        Command::SweepMs2 => commands::sweep_ms2(&cfg),
        Command::SweepAlloc => commands::sweep_alloc(&cfg),
        Command::SweepUsers => commands::sweep_users(&cfg),
        Command::CaseStudy => commands::case_study_cmd(&cfg),
        Command::OracleCheck => commands::oracle_check(&cfg),
        Command::Selftest => commands::selftest(&cfg),
    }?;
    for line in &outcome.summary {
        println!("{line}");
    }
    for path in output::emit(&cfg, &outcome.table, &outcome.results)? {
        println!("wrote {}", path.display());
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("failed checks: {}", outcome.failures.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
