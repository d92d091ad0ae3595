//! `ime`: generate data, fit the embedding layer, embed queries, evaluate,
//! sweep parameters and benchmark query cost.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ime_core::ImeError;

use crate::args::{BenchArgs, EmbedArgs, EvalArgs, FitArgs, GenerateArgs, SweepArgs};

#[derive(Debug, Parser)]
#[command(
    name = "ime",
    version,
    about = "Iterative manifold embedding layer for descriptor retrieval"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic Swiss roll (optionally with holes) and its ground truth.
    Generate(GenerateArgs),
    /// Fit the embedding on a database and distil it into a layer file.
    Fit(FitArgs),
    /// Push query descriptors through a fitted layer.
    Embed(EmbedArgs),
    /// Score query coordinates against database coordinates.
    Eval(EvalArgs),
    /// Fit and score every combination of the given parameter values.
    Sweep(SweepArgs),
    /// Time per-query embedding for the layer, the graph query and PCA.
    Bench(BenchArgs),
}

fn exit_code(err: &ImeError) -> u8 {
    match err.category() {
        "invalid-argument" => 2,
        "io" | "parse" => 3,
        "numerical" => 4,
        _ => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Embed(a) => commands::embed(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Bench(a) => commands::bench(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let detail = err.to_string().replace('\n', " ");
            eprintln!("error: {}: {detail}", err.category());
            ExitCode::from(exit_code(&err))
        }
    }
}
