use std::fmt;
use std::path::PathBuf;

use cakgcn_core::data::TaskKind;
use cakgcn_core::model::{Ablation, Aggregator, Head, ModelKind};
use clap::{Args, Parser, Subcommand};

/// Flag combinations clap cannot reject on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "usage: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "cakgcn", version, about = "Context-aware knowledge graph convolutional recommender")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest raw TSV files into a split dataset bundle.
    Prepare(PrepareArgs),
    /// Generate a synthetic dataset with planted attention ground truth.
    Synth(SynthArgs),
    /// Train a model (or grid-search one) on a bundle.
    Train(TrainArgs),
    /// Score a checkpoint on a bundle's test split.
    Evaluate(EvaluateArgs),
    /// Explain recommendations and cluster users by factor attention.
    Explain(ExplainArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// interactions.tsv: user, item, one column per factor, label.
    #[arg(long)]
    pub interactions: PathBuf,
    /// Schema sidecar declaring task, scale and factor order.
    #[arg(long)]
    pub schema: PathBuf,
    /// kg.tsv with head, relation, tail. Optional; without it the graph is empty.
    #[arg(long)]
    pub kg: Option<PathBuf>,
    /// Ingestion transform, applied in order: `drop-column NAME` or
    /// `column-to-relation COLUMN=RELATION`. Repeatable.
    #[arg(long = "transform")]
    pub transforms: Vec<String>,
    /// Bundle output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Split seed (80/10/10 random split for rating, leave-one-out for ranking).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 200 users, 300 items, factors 4/4/4, 4 relations, 64 attribute values.
    Recovery,
    /// 957 users, 4082 items, factors 7/2/3/9/77, 5 relations, 84 attribute values.
    Frappe,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "recovery")]
    pub preset: Preset,
    /// ranking (implicit positives) or rating (1-5).
    #[arg(long)]
    pub task: Option<TaskKind>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    /// Conditions per factor, comma separated (e.g. 4,4,4).
    #[arg(long)]
    pub conditions: Option<String>,
    #[arg(long)]
    pub relations: Option<usize>,
    /// Attribute values across all relations.
    #[arg(long)]
    pub entities: Option<usize>,
    #[arg(long)]
    pub interactions: Option<usize>,
    /// Probability that an interaction ignores the planted preferences.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also split the data and report the logistic probe's test AUC (ranking only).
    #[arg(long)]
    pub probe: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// cakgcn, or the one-hot baselines fm / nfm.
    #[arg(long, default_value = "cakgcn")]
    pub model: ModelKind,
    /// sum | cat | avg
    #[arg(long, default_value = "sum")]
    pub aggregator: Aggregator,
    /// mf | fm | mlp | nfm (default nfm; plain-mf implies mf)
    #[arg(long)]
    pub head: Option<Head>,
    /// full | ca | kgcn | plain-mf
    #[arg(long, default_value = "full")]
    pub ablation: Ablation,
    /// Embedding dimension d.
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 256)]
    pub batch: usize,
    /// L2 regularization λ.
    #[arg(long, default_value_t = 1e-3)]
    pub l2: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Stop after this many epochs without validation improvement.
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Training negatives per positive, resampled every epoch (ranking only).
    #[arg(long, default_value_t = 2)]
    pub negatives: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub run: RunArgs,
    /// Grid search instead of a single run. `default` is lr {5e-4..5e-2} ×
    /// batch {128..1024} × λ {5e-4..1e-1} × dropout {0..0.5}; otherwise e.g.
    /// `lr=1e-3,5e-3;l2=1e-3` (omitted keys take the default lists).
    #[arg(long)]
    pub grid: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    /// Expected task; defaults to the checkpoint's.
    #[arg(long)]
    pub task: Option<TaskKind>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub bundle: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// User to explain recommendations for.
    #[arg(long)]
    pub user: Option<String>,
    /// Situation as `cond1|cond2|...` or `factor=cond,...`.
    #[arg(long)]
    pub situation: Option<String>,
    /// Item to explain; without it the top `--recommend` items are explained.
    #[arg(long)]
    pub item: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub recommend: usize,
    /// Relations and factors cited per explanation.
    #[arg(long, default_value_t = 1)]
    pub top_n: usize,
    /// Cluster test-set users by factor attention.
    #[arg(long)]
    pub cluster: bool,
    /// Cluster count, or `auto` for silhouette selection over 2..=6.
    #[arg(long, default_value = "auto")]
    pub k: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}
