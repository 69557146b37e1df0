//! `rtsched`: generate, solve, validate and report radiotherapy scheduling
//! instances.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Exit codes besides 0 (success) and 2 (usage errors, also used by clap).
pub mod exit {
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const INFEASIBLE: u8 = 3;
    pub const TIMEOUT: u8 = 4;
}

#[derive(Debug, Parser)]
#[command(name = "rtsched", version, about = "Radiotherapy treatment scheduling")]
struct Cli {
    /// Directory that relative instance paths are also looked up in.
    #[arg(long, global = true, env = "RTSCHED_FIXTURES")]
    fixtures: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Column generation with an integer finish.
    Cg,
    Greedy,
    /// Randomised constructive search with restarts.
    Restart,
    /// Exhaustive search; tiny instances only.
    Oracle,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the clinic and write daily instances.
    Generate(commands::GenerateArgs),
    /// Solve an instance, or every instance in a directory.
    Solve(commands::SolveArgs),
    /// Check a solution against an instance.
    Validate(commands::ValidateArgs),
    /// Per-patient metrics and per-priority summaries as CSV.
    Report(commands::ReportArgs),
    /// Weighted-sum sweep between waiting time and window preferences.
    Pareto(commands::ParetoArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("RTSCHED_LOG", "warn")).init();
    let cli = Cli::parse();
    let ctx = commands::Context { fixtures: cli.fixtures };
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&ctx, a),
        Command::Solve(a) => commands::solve(&ctx, a),
        Command::Validate(a) => commands::validate(&ctx, a),
        Command::Report(a) => commands::report(&ctx, a),
        Command::Pareto(a) => commands::pareto(&ctx, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
