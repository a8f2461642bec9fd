//! `slm`: import corpora, train, evaluate and sweep the sentence-level model.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slm_core::model::Arch;
use slm_core::training::DistractorMode;

#[derive(Debug, Parser)]
#[command(name = "slm", version, about = "Sentence-level language model toolkit")]
pub struct Cli {
    /// Worker threads for evaluation and training (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate embeddings and a story index and write them in canonical form.
    Import(ImportArgs),
    /// Train a model and write checkpoint, optimizer state and log.
    Train(TrainArgs),
    /// Evaluate a checkpoint.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Train and rank once per distractor count.
    Sweep(SweepArgs),
    /// Generate a synthetic corpus with a learnable context-to-target map.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Embedding file in SLMB format.
    #[arg(long, conflicts_with = "text_matrix", required_unless_present = "text_matrix")]
    pub embeddings: Option<PathBuf>,
    /// Text matrix: one row per line, space-separated decimals.
    #[arg(long)]
    pub text_matrix: Option<PathBuf>,
    #[arg(long)]
    pub index: PathBuf,
    /// Optional labeled cloze file checked against the embeddings.
    #[arg(long)]
    pub cloze: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Clone)]
pub struct ModelArgs {
    #[arg(long, default_value = "mlp")]
    pub arch: Arch,
    #[arg(long, default_value_t = 1024)]
    pub hidden_dim: usize,
    /// Hidden layers of the mlp.
    #[arg(long, default_value_t = 3)]
    pub num_layers: usize,
    /// Residual blocks of the resmlp.
    #[arg(long, default_value_t = 1)]
    pub blocks: usize,
    #[arg(long, default_value_t = 0.5)]
    pub dropout: f32,
}

/// Overrides applied on top of the config file.
#[derive(Debug, Args, Clone)]
pub struct TrainOverrides {
    #[arg(long)]
    pub distractors: Option<usize>,
    #[arg(long)]
    pub distractor_mode: Option<DistractorMode>,
    #[arg(long)]
    pub cs_loss_weight: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// Held-out stories scored by P@10 against the train and held-out pools.
    #[arg(long, conflicts_with = "valid_cloze")]
    pub valid_index: Option<PathBuf>,
    /// Held-out cloze items scored by accuracy.
    #[arg(long)]
    pub valid_cloze: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Two-ending cloze accuracy.
    Cloze(EvalClozeArgs),
    /// Rank every query's true sentence within a candidate pool.
    Rank(EvalRankArgs),
}

#[derive(Debug, Args)]
pub struct EvalClozeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub cloze: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalRankArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Stories whose target sentence is ranked.
    #[arg(long)]
    pub index: PathBuf,
    /// Index files whose target-position sentences form the pool (merged).
    #[arg(long, required = true, num_args = 1..)]
    pub pool: Vec<PathBuf>,
    /// Cutoffs for P@k.
    #[arg(long, value_delimiter = ',', default_value = "1,10")]
    pub k: Vec<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Training stories.
    #[arg(long)]
    pub index: PathBuf,
    /// Held-out stories to rank.
    #[arg(long)]
    pub query_index: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub pool: Vec<PathBuf>,
    /// Distractor counts, e.g. "1,8,64,512".
    #[arg(long, value_delimiter = ',', required = true)]
    pub grid: Vec<usize>,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub overrides: TrainOverrides,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 5000)]
    pub stories: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 5)]
    pub sentences_per_story: usize,
    #[arg(long, default_value_t = 4)]
    pub context_len: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise_ratio: f64,
    /// Trailing stories written to the held-out index.
    #[arg(long, default_value_t = 500)]
    pub held_out: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
