//! `batchsplit`: batched split evaluation, tour search, and benchmark
//! drivers for capacitated vehicle routing under stochastic demands.

mod cmd;
mod opts;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "batchsplit",
    version = opts::VERSION,
    about = "Batched route-splitting, scenario sampling, and search for \
             vehicle routing under stochastic demands"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample demand scenarios into a binary scenario file.
    GenScenarios(cmd::GenArgs),
    /// Split one giant tour against a scenario batch and report statistics.
    Eval(cmd::EvalArgs),
    /// Search for a good giant tour on sampled training scenarios.
    Solve(cmd::SolveArgs),
    /// Measure batch-split wall time across scenario counts and workers.
    BenchScaling(cmd::BenchScalingArgs),
    /// Out-of-sample cost of tours trained on varying sample sizes.
    ExperimentTrainsize(cmd::TrainsizeArgs),
    /// Anytime search traces under a fixed wall-clock budget.
    BenchBudget(cmd::BenchBudgetArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenScenarios(args) => cmd::gen_scenarios(args),
        Command::Eval(args) => cmd::eval(args),
        Command::Solve(args) => cmd::solve_cmd(args),
        Command::BenchScaling(args) => cmd::bench_scaling(args),
        Command::ExperimentTrainsize(args) => cmd::experiment_trainsize(args),
        Command::BenchBudget(args) => cmd::bench_budget(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
