//! Command-line arguments. Every subcommand is serializable so that its run
//! manifest can replay it.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fairpost::bias::PartitionSpec;
use fairpost::calibrate::{CalibrationMethod, CalibrationTarget};
use fairpost::mitigate::SurrogateKind;
use fairpost::transform::{FocalRule, TransformKind};
use fairpost::Favorable;

#[derive(Debug, Parser)]
#[command(name = "fairpost", version, about = "Model bias measurement, explanation and post-processing mitigation")]
pub struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "FAIRPOST_THREADS")]
    pub threads: Option<usize>,

    /// Where to write the run manifest (defaults to `<out>.manifest.json`).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Draw a synthetic dataset (M1 to M4).
    Generate(GenerateArgs),
    /// Train a probability model of y on the predictors (g is not used).
    Train(TrainArgs),
    /// Measure the bias of a trained model.
    Bias(BiasArgs),
    /// Bias explanations of every predictor.
    Explain(ExplainArgs),
    /// Bias/loss frontier of post-processed models.
    Mitigate(MitigateArgs),
    /// Bias of the model with some predictors compressed, over a grid of factors.
    Curve(CurveArgs),
    /// Calibrate a post-processed model and report bias, loss and AUC.
    Calibrate(CalibrateArgs),
    /// Bias/loss frontier of retrained boosted models over a hyperparameter box.
    CompareBaseline(BaselineArgs),
    /// Re-run the command recorded in a manifest.
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    /// M1, M2, M3 or M4.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// P(G = 1).
    #[arg(long, default_value_t = 0.5)]
    pub p_protected: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Gbm,
    Logistic,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelKind::Gbm)]
    pub kind: ModelKind,
    /// Direction of favorable model outputs.
    #[arg(long, value_enum, default_value_t = FavorableArg::Up)]
    pub favorable: FavorableArg,
    #[command(flatten)]
    pub gbm: GbmArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct GbmArgs {
    #[arg(long, default_value_t = 150)]
    pub n_estimators: usize,
    #[arg(long, default_value_t = 8)]
    pub max_leaves: usize,
    #[arg(long, default_value_t = 3)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 0.1)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 50)]
    pub min_samples_leaf: usize,
    #[arg(long, default_value_t = 1.0)]
    pub l2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FavorableArg {
    Up,
    Down,
}

impl From<FavorableArg> for Favorable {
    fn from(f: FavorableArg) -> Self {
        match f {
            FavorableArg::Up => Favorable::Up,
            FavorableArg::Down => Favorable::Down,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionArg {
    /// Statistical parity: one cell, the whole population.
    Sp,
    /// Equalized odds: cells Y=0 and Y=1 with weights 1/2.
    Eo,
}

impl PartitionArg {
    pub fn spec(self) -> PartitionSpec {
        match self {
            PartitionArg::Sp => PartitionSpec::statistical_parity(),
            PartitionArg::Eo => PartitionSpec::equalized_odds(),
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelInput {
    #[arg(long)]
    pub data: PathBuf,
    /// Model JSON written by `train`.
    #[arg(long = "model-file")]
    pub model_file: PathBuf,
    #[arg(long, value_enum, default_value_t = PartitionArg::Sp)]
    pub partition: PartitionArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BiasArgs {
    #[command(flatten)]
    pub input: ModelInput,
    /// Also report the classifier bias of `1{f > t}` at these thresholds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplainMethod {
    /// Partial dependence.
    Pdp,
    /// Marginal Shapley values.
    Shapley,
    /// Shapley bias game with the four sign atoms.
    ShapleyGame,
    /// Expected individual bias explanations.
    Ibe,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub input: ModelInput,
    #[arg(long, value_enum, default_value_t = ExplainMethod::Pdp)]
    pub method: ExplainMethod,
    /// Sample Shapley values with this many permutations instead of enumerating.
    #[arg(long)]
    pub permutations: Option<usize>,
    /// Anchors for `ibe`.
    #[arg(long, default_value_t = 200)]
    pub anchors: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep at most this many predictors from each sign list when selecting.
    #[arg(long)]
    pub m_star: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SplitArgs {
    /// Dataset used for training-side statistics (focal points), or split
    /// into train/holdout/test when `--holdout` and `--test` are absent.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub holdout: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Train/holdout/test fractions used when splitting `--data`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 0.25, 0.25])]
    pub split: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SearchArgs {
    /// Penalties (defaults to 0, 0.1, ..., 2).
    #[arg(long, value_delimiter = ',')]
    pub omegas: Vec<f64>,
    #[arg(long, default_value_t = 400)]
    pub n_prior: usize,
    #[arg(long, default_value_t = 50)]
    pub n_bo: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = SurrogateArg::Tpe)]
    pub surrogate: SurrogateArg,
    #[arg(long, value_enum, default_value_t = PartitionArg::Sp)]
    pub partition: PartitionArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateArg {
    Tpe,
    Gp,
    Random,
}

impl From<SurrogateArg> for SurrogateKind {
    fn from(s: SurrogateArg) -> Self {
        match s {
            SurrogateArg::Tpe => SurrogateKind::Tpe,
            SurrogateArg::Gp => SurrogateKind::GpEi,
            SurrogateArg::Random => SurrogateKind::Random,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Global,
    Asymmetric,
    Local,
}

impl From<KindArg> for TransformKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Global => TransformKind::Global,
            KindArg::Asymmetric => TransformKind::Asymmetric,
            KindArg::Local => TransformKind::Local,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FocalArg {
    Mean,
    Median,
    KsArgmax,
}

impl From<FocalArg> for FocalRule {
    fn from(f: FocalArg) -> Self {
        match f {
            FocalArg::Mean => FocalRule::Mean,
            FocalArg::Median => FocalRule::Median,
            FocalArg::KsArgmax => FocalRule::KsArgmax,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationArg {
    LinkLinear,
    Pava,
    LogisticRefit,
}

impl From<CalibrationArg> for CalibrationMethod {
    fn from(c: CalibrationArg) -> Self {
        match c {
            CalibrationArg::LinkLinear => CalibrationMethod::LinkLinear,
            CalibrationArg::Pava => CalibrationMethod::Pava,
            CalibrationArg::LogisticRefit => CalibrationMethod::LogisticRefit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetArg {
    BaseScores,
    Labels,
}

impl From<TargetArg> for CalibrationTarget {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::BaseScores => CalibrationTarget::BaseScores,
            TargetArg::Labels => CalibrationTarget::Labels,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MitigateArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long = "model-file")]
    pub model_file: PathBuf,
    /// Predictors to transform, by column name.
    #[arg(long, value_delimiter = ',', required = true)]
    pub predictors: Vec<String>,
    #[arg(long, value_enum, default_value_t = KindArg::Global)]
    pub transform: KindArg,
    #[arg(long, default_value_t = 0.5)]
    pub a_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub a_max: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma_min: f64,
    #[arg(long, default_value_t = 2.0)]
    pub sigma_max: f64,
    #[arg(long, value_enum, default_value_t = FocalArg::Mean)]
    pub focal: FocalArg,
    /// Also search each focal point within this distance of its rule value.
    #[arg(long)]
    pub focal_halfwidth: Option<f64>,
    #[arg(long, value_enum, default_value_t = CalibrationArg::LinkLinear)]
    pub calibration: CalibrationArg,
    #[arg(long, value_enum, default_value_t = TargetArg::BaseScores)]
    pub calibration_target: TargetArg,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Frontier CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CurveArgs {
    #[command(flatten)]
    pub input: ModelInput,
    #[arg(long, value_delimiter = ',', required = true)]
    pub predictors: Vec<String>,
    /// `lo:hi` (unit steps), `lo:hi:step`, or a comma-separated list.
    #[arg(long, default_value = "1:15")]
    pub a_grid: String,
    #[arg(long, value_enum, default_value_t = FocalArg::Mean)]
    pub focal: FocalArg,
    /// Calibrate each compressed model onto the base scores.
    #[arg(long, value_enum)]
    pub calibration: Option<CalibrationArg>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub input: ModelInput,
    /// Transform parameters as JSON (the `gamma_json` column of a frontier).
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, value_enum, default_value_t = CalibrationArg::LinkLinear)]
    pub method: CalibrationArg,
    #[arg(long, value_enum, default_value_t = TargetArg::BaseScores)]
    pub target: TargetArg,
    /// Rows on which to report; defaults to the fitting rows.
    #[arg(long)]
    pub eval: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_enum, default_value_t = FavorableArg::Up)]
    pub favorable: FavorableArg,
    #[arg(long, value_delimiter = ',', default_values_t = [40, 250])]
    pub n_estimators: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [4, 20])]
    pub max_leaves: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [2, 20])]
    pub max_depth: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.5])]
    pub learning_rate: Vec<f64>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest_file: PathBuf,
}

impl Command {
    /// Primary output path, used to name the default manifest.
    pub fn out(&self) -> Option<&std::path::Path> {
        Some(match self {
            Command::Generate(a) => &a.out,
            Command::Train(a) => &a.out,
            Command::Bias(a) => &a.out,
            Command::Explain(a) => &a.out,
            Command::Mitigate(a) => &a.out,
            Command::Curve(a) => &a.out,
            Command::Calibrate(a) => &a.out,
            Command::CompareBaseline(a) => &a.out,
            Command::Replay(_) => return None,
        })
    }
}
