//! `germeval`: command-line runs of the ensemble pipeline.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{RunConfig, SchemaFlags};

#[derive(Debug, Parser)]
#[command(name = "germeval", version, about = "Soft-voting ensembles for toxic, engaging and fact-claiming comment classification")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

/// Output directory flag shared by every command. Without it, outputs go
/// to `<runs>/<command>-<config hash>`.
#[derive(Debug, Clone, clap::Args)]
pub struct OutArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the seeded synthetic corpus (comments.csv).
    Synth {
        #[arg(long)]
        size: Option<usize>,
        /// Extra rows repeating earlier comments.
        #[arg(long)]
        duplicates: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Deduplicate and clean a comment file (comments.csv, stats.json).
    Preprocess {
        /// Comment file, or a `synth` run directory.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        max_tokens: Option<usize>,
        /// Skip deduplication (for test data, whose rows must all be answered).
        #[arg(long)]
        keep_duplicates: bool,
        #[command(flatten)]
        schema: SchemaFlags,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Split a cleaned dataset into cross-validation folds (folds.json).
    Split {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        k: Option<usize>,
        /// Early-stopping fraction of each fold's training portion.
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        schema: SchemaFlags,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Train a pool of baseline models per fold (pool.json, tables/, models/).
    TrainPool(commands::TrainPoolArgs),
    /// Predict probabilities with a pool's saved models (predictions.csv).
    Predict {
        /// Pool directory written by `train-pool --keep-models`.
        #[arg(long)]
        pool: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Restrict to members of one fold (`all` for models trained on all data).
        #[arg(long)]
        fold: Option<String>,
        #[command(flatten)]
        schema: SchemaFlags,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Evaluate an ensemble by cross-validation, or on a probability file.
    EnsembleEval(commands::EnsembleEvalArgs),
    /// Bootstrap ensemble-size experiment (<composition>.summary.csv and more).
    Bootstrap(commands::BootstrapArgs),
    /// Render bootstrap summaries as SVG (figure.svg).
    Plot {
        /// Summary file or `bootstrap` run directory, optionally `name=path`. Repeatable.
        #[arg(long, required = true)]
        summary: Vec<String>,
        /// Series drawn with a ±1 std band.
        #[arg(long)]
        band: Option<String>,
        #[arg(long, default_value = "Macro-F1 by ensemble size")]
        title: String,
        #[command(flatten)]
        out: OutArgs,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth { size, duplicates, seed, out } => commands::synth(&cfg, size, duplicates, seed, out.out),
        Command::Preprocess { input, max_tokens, keep_duplicates, schema, out } => {
            commands::preprocess(&cfg, input, max_tokens, keep_duplicates, &schema, out.out)
        }
        Command::Split { data, k, fraction, seed, schema, out } => {
            commands::split(&cfg, data, k, fraction, seed, &schema, out.out)
        }
        Command::TrainPool(args) => commands::train_pool(&cfg, args),
        Command::Predict { pool, data, fold, schema, out } => {
            commands::predict(&cfg, pool, data, fold, &schema, out.out)
        }
        Command::EnsembleEval(args) => commands::ensemble_eval(&cfg, args),
        Command::Bootstrap(args) => commands::bootstrap(&cfg, args),
        Command::Plot { summary, band, title, out } => commands::plot(&cfg, &summary, band, &title, out.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
