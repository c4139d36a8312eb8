//! Command-line pipeline for cross-domain identity retrieval: synthetic data,
//! triplet enumeration, head training, embedding export, gallery search, and
//! ranking metrics, each stage reading and writing plain CSV/JSON files.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser)]
#[command(
    name = "cranioface",
    version,
    about = "Skull-to-face identity retrieval: train a projection head with a \
             triplet margin, then rank a face gallery by distance-based confidence"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired-identity catalog and feature table
    Synth(commands::synth::SynthArgs),
    /// Enumerate triplets from a catalog and split train/validation
    Triplets(commands::triplets::TripletsArgs),
    /// Extract baseline features or validate a precomputed table
    Features(commands::features::FeaturesArgs),
    /// Train the skull projection head with the triplet hinge
    Train(commands::train::TrainArgs),
    /// Export embeddings (frozen faces, projected skulls)
    Embed(commands::embed::EmbedArgs),
    /// Rank a gallery for one probe
    Query(commands::query::QueryArgs),
    /// Compute Recall/mAP/MRR and k-sweep curves
    Evaluate(commands::evaluate::EvaluateArgs),
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Synth(args) => commands::synth::run(args),
        Command::Triplets(args) => commands::triplets::run(args),
        Command::Features(args) => commands::features::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Embed(args) => commands::embed::run(args),
        Command::Query(args) => commands::query::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // One machine-parseable record, then the human line.
            eprintln!(
                "{}",
                serde_json::json!({"error": e.code, "message": e.message})
            );
            eprintln!("error: {}", e.message);
            ExitCode::from(e.exit)
        }
    }
}
