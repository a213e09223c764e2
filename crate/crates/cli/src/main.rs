//! Command-line pipeline: generate, preprocess, train, predict, ensemble,
//! reading comprehension and evaluation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] oncoie::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Core(oncoie::Error::Config(_)) => 1,
            CliError::Core(e) => e.exit_code() as u8,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oncoie", version, about = "Attribute extraction from oncology imaging reports")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Vote count for `ensemble`, rejection threshold for the MRC commands.
    #[arg(long, global = true)]
    pub threshold: Option<String>,
    /// Tagger architecture for `train`.
    #[arg(long, global = true)]
    pub model: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus to OUT/corpus.jsonl.
    Gen {
        /// Number of reports; overrides the config.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Keyword-filter and section-split a corpus into OUT/preprocessed.jsonl.
    Preprocess { input: PathBuf },
    /// Train a tagger; the model is written to OUT.
    Train {
        input: PathBuf,
        /// Dev set for early stopping; otherwise split off the input.
        #[arg(long)]
        dev: Option<PathBuf>,
    },
    /// Tag reports with a saved model into OUT/predictions.jsonl.
    Predict { model_dir: PathBuf, input: PathBuf },
    /// Vote over several prediction files into OUT/fused.jsonl.
    Ensemble {
        #[arg(required = true)]
        predictions: Vec<PathBuf>,
    },
    /// Train the reading-comprehension model; the model is written to OUT.
    MrcTrain {
        input: PathBuf,
        /// Dev set for early stopping and the rejection-threshold sweep.
        #[arg(long)]
        dev: Option<PathBuf>,
    },
    /// Answer the three attribute questions into OUT/predictions.jsonl.
    MrcPredict { model_dir: PathBuf, input: PathBuf },
    /// Score predictions against gold; prints a table and writes OUT/eval.json.
    Eval { gold: PathBuf, predictions: PathBuf },
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
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
