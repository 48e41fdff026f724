use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::recurrent::CellKind;

#[derive(Debug, Parser)]
#[command(
    name = "evpred",
    version,
    about = "Train and evaluate encoder-decoder event predictors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split a pair corpus into train/dev/test files.
    Split(SplitArgs),
    /// Train a model and keep the best-dev-BLEU checkpoint.
    Train(TrainArgs),
    /// Greedy-decode source sentences with a checkpoint.
    Predict(PredictArgs),
    /// Score predictions: BLEU, per-length BLEU and paraphrase-set accuracy.
    Evaluate(EvaluateArgs),
    /// Finite-difference check of the analytic gradients.
    Gradcheck(GradcheckArgs),
    /// Generate a synthetic script corpus and its paraphrase inventory.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitMode {
    /// Every 5th and 10th pair go to dev and test.
    Descript,
    /// Seeded shuffle with the given fractions.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

impl From<OnOff> for bool {
    fn from(v: OnOff) -> bool {
        v == OnOff::On
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Pair corpus (`source<TAB>target` lines).
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "descript")]
    pub mode: SplitMode,
    /// Output directory; defaults to the input's directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    pub dev_frac: f64,
    #[arg(long, default_value_t = 0.1)]
    pub test_frac: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Run configuration (`key=value` lines); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory for checkpoint, vocabulary, history and config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub cell: Option<CellKind>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long, value_enum)]
    pub attention: Option<OnOff>,
    #[arg(long, value_enum)]
    pub bidirectional: Option<OnOff>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub max_decode_len: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Maximum number of non-special vocabulary entries.
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub clip_norm: Option<f64>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Source sentences, or `source<TAB>target` pairs.
    #[arg(long)]
    pub input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Decoding threads. Output order does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// One predicted sentence per line.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Pair corpus supplying both sources and references.
    #[arg(long, conflicts_with_all = ["references", "sources"])]
    pub pairs: Option<PathBuf>,
    /// One reference sentence per line.
    #[arg(long, requires = "sources")]
    pub references: Option<PathBuf>,
    /// One source sentence per line.
    #[arg(long, requires = "references")]
    pub sources: Option<PathBuf>,
    /// Gold paraphrase sets (`scenario<TAB>set_id<TAB>sentence`).
    #[arg(long)]
    pub inventory: Option<PathBuf>,
    /// Near-miss export path; defaults to `<predictions>.nearmiss.tsv`.
    #[arg(long, requires = "inventory")]
    pub near_miss: Option<PathBuf>,
    /// Report file; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Check one variant, e.g. `lstm-l2-att`.
    #[arg(long)]
    pub variant: Option<String>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Dropout rate with a frozen mask.
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub scenarios: usize,
    #[arg(long, default_value_t = 10)]
    pub events: usize,
    #[arg(long, default_value_t = 3)]
    pub paraphrases: usize,
    /// Distinct object words.
    #[arg(long, default_value_t = 50)]
    pub objects: usize,
    /// Successors per event; 2 adds a disambiguating cue word to each source.
    #[arg(long, default_value_t = 1)]
    pub branching: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}
