use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "emonet",
    version,
    about = "Emotion classification from facial Motion-Unit features"
)]
pub struct Cli {
    /// Seed for every random choice made by the command.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Leave the run timestamp out of stdout and of search records.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate synthetic labeled sequences from Bezier emotion templates.
    Synth(SynthArgs),
    /// Filter, balance and split a dataset.
    Prepare(PrepareArgs),
    /// Train a network with momentum backpropagation.
    Train(TrainArgs),
    /// Train a network by minimizing its total error with Powell's method.
    PowellTrain(PowellTrainArgs),
    /// Grid search over sigma, alpha, lambda and hidden layouts.
    Search(SearchArgs),
    /// Score a model on a dataset and print its confusion table.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// `label,mu1,...,mu12` apex lines replacing the built-in templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub frames: usize,
    #[arg(long, default_value_t = 5)]
    pub neutral_prefix: usize,
    /// Standard deviation of the Gaussian noise on every MU value.
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 10)]
    pub sequences_per_emotion: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BalanceMode {
    /// First frames of each class in dataset order.
    First,
    /// Frames drawn at random using the seed.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitMode {
    Sequence,
    Frame,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Output file, or the training side when splitting.
    #[arg(long)]
    pub out: PathBuf,
    /// Keep only the frames of the emotional span.
    #[arg(long)]
    pub exclude_neutral: bool,
    /// Keep this many frames around the middle of each emotional span.
    #[arg(long)]
    pub peak_frames: Option<usize>,
    /// Neutral frames kept per sequence together with --peak-frames.
    #[arg(long, default_value_t = 0, requires = "peak_frames")]
    pub peak_neutral: usize,
    /// Truncate every class to the smallest class count.
    #[arg(long, num_args = 0..=1, default_missing_value = "first")]
    pub balance: Option<BalanceMode>,
    /// Fraction of units sent to --out; the rest go to --test-out.
    #[arg(long, allow_hyphen_values = true, requires = "test_out")]
    pub split: Option<f64>,
    #[arg(long, value_enum, default_value_t = SplitMode::Sequence)]
    pub split_by: SplitMode,
    #[arg(long, requires = "split")]
    pub test_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct NetArgs {
    /// Output categories: all, emotions, four-way, <emotion>-vs-rest, or a
    /// comma-separated list of emotions.
    #[arg(long, default_value = "all")]
    pub categories: String,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.3)]
    pub alpha: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    pub lambda: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    pub sigma: f64,
    /// Hidden layer sizes, e.g. `10` or `29,28`.
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 1000)]
    pub max_epochs: usize,
    /// Epochs without an accuracy improvement before training stops.
    #[arg(long, default_value_t = 20)]
    pub patience: usize,
    /// Clamp weights to [-clip, clip] after every update.
    #[arg(long, allow_hyphen_values = true)]
    pub weight_clip: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.5)]
    pub init_lo: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    pub init_hi: f64,
    /// Initial weights with a larger magnitude are redrawn.
    #[arg(long, allow_hyphen_values = true, default_value_t = 10.0)]
    pub init_threshold: f64,
    /// Take the parameters from the best record of a search records file.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    #[command(flatten)]
    pub net: NetArgs,
    /// Write `epoch,train_accuracy` lines here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PowellTrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    #[command(flatten)]
    pub net: NetArgs,
    /// Start from this model instead of fresh weights.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Stop after the cycle in which this many evaluations were used.
    #[arg(long)]
    pub max_evaluations: Option<usize>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1e-8)]
    pub ftol: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1e-4)]
    pub line_tol: f64,
    /// Small random initial directions instead of the unit basis.
    #[arg(long)]
    pub random_directions: bool,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.01)]
    pub direction_scale: f64,
    /// Report the evaluation at which training accuracy first reached this.
    #[arg(long, allow_hyphen_values = true)]
    pub accuracy_threshold: Option<f64>,
    /// Write `evaluations,best_error` lines here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub validation: PathBuf,
    /// Records file; improvements are appended.
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, default_value = "all")]
    pub categories: String,
    /// Sigma range `lo:hi:step` or a single value.
    #[arg(long, allow_hyphen_values = true, default_value = "1")]
    pub sigma: String,
    #[arg(long, allow_hyphen_values = true, default_value = "0.3")]
    pub alpha: String,
    #[arg(long, allow_hyphen_values = true, default_value = "0.5")]
    pub lambda: String,
    /// A hidden layout such as `10` or `29,28`; repeat for more layouts.
    #[arg(long)]
    pub hidden: Vec<String>,
    /// Stop after this many combinations without improvement.
    #[arg(long)]
    pub patience_turns: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub epochs_per_combo: usize,
    #[arg(long)]
    pub median_window: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub weight_clip: Option<f64>,
    #[arg(long, allow_hyphen_values = true, default_value_t = -0.5)]
    pub init_lo: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.5)]
    pub init_hi: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 10.0)]
    pub init_threshold: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "all")]
    pub categories: String,
    /// Median-filter the predicted categories of each sequence.
    #[arg(long)]
    pub median_window: Option<usize>,
    /// Write one-hot instead of raw output vectors to --outputs.
    #[arg(long)]
    pub normalize: bool,
    /// Write one output vector per frame here.
    #[arg(long)]
    pub outputs: Option<PathBuf>,
    /// Write `true,predicted,count` rows here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Decimal places of the average rate.
    #[arg(long, default_value_t = 1)]
    pub decimals: usize,
}
