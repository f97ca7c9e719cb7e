//! `lectsum`: turn a directory of lecture frames into a composite summary
//! image, and score such summaries against viewer surveys.

mod config;
mod deck;
mod evaluate;
mod oracle;
mod summarize;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Command failure with the exit code it maps to: 2 for configuration
/// problems (bad flags, bad config file), 1 for anything that breaks after
/// the run is properly configured.
pub enum Failure {
    Config(anyhow::Error),
    Stage(anyhow::Error),
}

impl Failure {
    pub fn config(err: impl Into<anyhow::Error>) -> Failure {
        Failure::Config(err.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Failure {
        Failure::Stage(err)
    }
}

impl From<lectsum::Error> for Failure {
    fn from(err: lectsum::Error) -> Failure {
        Failure::Stage(err.into())
    }
}

impl From<std::io::Error> for Failure {
    fn from(err: std::io::Error) -> Failure {
        Failure::Stage(err.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(err: serde_json::Error) -> Failure {
        Failure::Stage(err.into())
    }
}

#[derive(Parser)]
#[command(
    name = "lectsum",
    version,
    about = "Summarize lecture screencast segments into composite images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline on one or more segment frame directories.
    Summarize(summarize::SummarizeArgs),
    /// Score summaries against a viewer survey.
    Evaluate(evaluate::EvaluateArgs),
    /// Compare greedy selection against the exhaustive optimum on generated
    /// instances.
    OracleCheck(oracle::OracleArgs),
    /// Write a deterministic synthetic slide deck for demos and tests.
    GenDeck(deck::GenDeckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Summarize(args) => summarize::run(args),
        Command::Evaluate(args) => evaluate::run(args),
        Command::OracleCheck(args) => oracle::run(args),
        Command::GenDeck(args) => deck::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(err)) => {
            eprintln!("config error: {err:#}");
            ExitCode::from(2)
        }
        Err(Failure::Stage(err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
