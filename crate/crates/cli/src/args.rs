use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use cloudqnn::baselines::{Activation, XuRandallConstants};
use cloudqnn::data::FeatureSet;
use cloudqnn::explain::ShapMode;
use cloudqnn::gradients::GradientMethod;
use cloudqnn::training::{Optimizer, ShotBudget};

fn parse<T: FromStr<Err = cloudqnn::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: cloudqnn::Error| e.to_string())
}

fn parse_fractions(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad fraction '{p}': {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| "expected three comma-separated fractions".to_string())
}

#[derive(Debug, Clone)]
pub struct ShotList(pub Vec<ShotBudget>);

fn parse_shot_list(s: &str) -> Result<ShotList, String> {
    s.split(',')
        .map(|p| parse(p.trim()))
        .collect::<Result<_, _>>()
        .map(ShotList)
}

#[derive(Debug, Parser)]
#[command(name = "cloudqnn", version, about = "Quantum neural network cloud-cover experiments")]
pub struct Cli {
    /// Worker threads for parallel inner loops (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cloud-cover dataset.
    Synth(SynthArgs),
    /// Train a QNN or MLP and write a checkpoint plus history CSV.
    Train(TrainArgs),
    /// Evaluate a checkpoint on one split of a dataset.
    Eval(EvalArgs),
    /// R² as a function of the inference shot budget.
    ShotSweep(ShotSweepArgs),
    /// SHAP attributions, importance ranking and cross-model stability.
    Shap(ShapArgs),
    /// QNN, MLP and Xu-Randall metrics side by side.
    Compare(CompareArgs),
    /// Re-run the experiment recorded in a manifest.
    Replay(ReplayArgs),
}

/// Constants of the Xu-Randall scheme.
#[derive(Debug, Args)]
pub struct XuRandallArgs {
    #[arg(long, default_value_t = XuRandallConstants::default().p)]
    pub xr_p: f64,
    #[arg(long, default_value_t = XuRandallConstants::default().alpha0)]
    pub xr_alpha0: f64,
    #[arg(long, default_value_t = XuRandallConstants::default().gamma)]
    pub xr_gamma: f64,
}

impl XuRandallArgs {
    pub fn constants(&self) -> XuRandallConstants {
        XuRandallConstants {
            p: self.xr_p,
            alpha0: self.xr_alpha0,
            gamma: self.xr_gamma,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub noise_sd: f64,
    #[command(flatten)]
    pub xu_randall: XuRandallArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Qnn,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitChoice {
    Train,
    Val,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint path; history goes to `<stem>.history.csv`.
    #[arg(long)]
    pub out: PathBuf,
    /// Experiment document (TOML). Command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// `full`, `reduced` or a comma-separated column list.
    #[arg(long, value_parser = parse::<FeatureSet>)]
    pub features: Option<FeatureSet>,
    #[arg(long)]
    pub n_enc: Option<usize>,
    #[arg(long)]
    pub n_var: Option<usize>,
    /// `leaky_relu` or `tanh`.
    #[arg(long, value_parser = parse::<Activation>)]
    pub activation: Option<Activation>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batches_per_epoch: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// `plain_gd` or `adam`.
    #[arg(long, value_parser = parse::<Optimizer>)]
    pub optimizer: Option<Optimizer>,
    /// `adjoint` or `parameter_shift`.
    #[arg(long, value_parser = parse::<GradientMethod>)]
    pub gradient: Option<GradientMethod>,
    /// Train on shot-estimated outputs and gradients.
    #[arg(long)]
    pub shots_in_training: Option<u64>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train/validation/test fractions, e.g. `0.7,0.1,0.2`.
    #[arg(long, value_parser = parse_fractions)]
    pub split: Option<[f64; 3]>,
    /// Seed of the split permutation (defaults to --seed).
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
    /// Finite shot budget; omit for exact expectation values.
    #[arg(long)]
    pub shots: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clamp predictions to [0, 1] before scoring.
    #[arg(long)]
    pub clamp: bool,
    /// JSON report path.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShotSweepArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
    /// Comma-separated budgets; `inf` is exact evaluation.
    #[arg(long, value_parser = parse_shot_list, default_value = "inf,100,1000,10000,100000")]
    pub shots: ShotList,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ShapArgs {
    /// Checkpoint path, or `xu-randall` for the diagnostic scheme. Repeat
    /// for a stability report.
    #[arg(long = "checkpoint", required = true)]
    pub checkpoints: Vec<String>,
    #[arg(long)]
    pub data: PathBuf,
    /// Split whose rows are explained.
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
    /// Explain only the first N rows of the split.
    #[arg(long)]
    pub max_instances: Option<usize>,
    #[arg(long, default_value_t = cloudqnn::explain::DEFAULT_BACKGROUND_SIZE)]
    pub background_size: usize,
    /// `exact` or `sampled:N`.
    #[arg(long, value_parser = parse::<ShapMode>, default_value = "exact")]
    pub mode: ShapMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub xu_randall: XuRandallArgs,
    /// Attribution CSV; summary and stability tables are written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub qnn: PathBuf,
    #[arg(long)]
    pub mlp: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitChoice::Test)]
    pub split: SplitChoice,
    /// Clamp predictions to [0, 1] before scoring.
    #[arg(long)]
    pub clamp: bool,
    #[command(flatten)]
    pub xu_randall: XuRandallArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    pub manifest: PathBuf,
    /// Primary output of the re-run (default: the recorded one).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
