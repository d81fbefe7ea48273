//! Command-line arguments. Every flag is optional on top of the config file
//! and overrides the value found there.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mssvdd::eval::SelectionMode;
use mssvdd::{DecisionStrategy, KernelKind, Method, Regularizer, UpdateStrategy};
use serde::de::DeserializeOwned;

/// Parses an enum from the same spelling its JSON form uses.
fn json_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "mssvdd",
    version,
    about = "Multi-modal subspace one-class classification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic multi-modal dataset as CSV files.
    Synth(SynthArgs),
    /// Train one model and save it.
    Train(TrainArgs),
    /// Label new samples with a saved model.
    Predict(PredictArgs),
    /// Cross-validate one configuration, or a grid with nested selection.
    Cv(CvArgs),
    /// Search a grid and write the best configuration and the score table.
    Gridsearch(GridsearchArgs),
    /// Render saved evaluation reports as one summary table.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Experiment config; only its `synth` and `seed` keys are used.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub n_target: Option<usize>,
    #[arg(long)]
    pub n_outlier: Option<usize>,
    /// Per-modality dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Model hyperparameter overrides.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// A bare model config JSON replacing the config file's `model` object.
    #[arg(long)]
    pub model_config: Option<PathBuf>,
    #[arg(long, value_parser = json_name::<Method>)]
    pub method: Option<Method>,
    /// Subspace dimensionality; also resets kappa to 1/d unless --kappa is given.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "c")]
    pub c_penalty: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// One of sd-, sd+, ad-+, ad+-.
    #[arg(long, value_parser = json_name::<UpdateStrategy>, allow_hyphen_values = true)]
    pub update: Option<UpdateStrategy>,
    /// omega0..omega6 or psi0..psi3.
    #[arg(long, value_parser = json_name::<Regularizer>)]
    pub regularizer: Option<Regularizer>,
    /// ds1, ds2, ds3 or ds4.
    #[arg(long, value_parser = json_name::<DecisionStrategy>)]
    pub decision: Option<DecisionStrategy>,
    #[arg(long)]
    pub kernelized: Option<bool>,
    /// linear, gaussian or composite.
    #[arg(long, value_parser = json_name::<KernelKind>)]
    pub kernel: Option<KernelKind>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Stack all modalities into one before training.
    #[arg(long)]
    pub concat: Option<bool>,
}

/// Dataset, fold and seed overrides shared by the data-driven commands.
#[derive(Debug, Args, Default)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// One feature CSV per modality; repeat the flag for each modality.
    #[arg(long = "data")]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Label value that marks the target class (0 or 1).
    #[arg(long)]
    pub target_label: Option<u8>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub inner_folds: Option<usize>,
    /// Z-score features with training-portion statistics.
    #[arg(long)]
    pub normalize: Option<bool>,
    /// nested or global.
    #[arg(long, value_parser = json_name::<SelectionMode>)]
    pub selection: Option<SelectionMode>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Where to write the model file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One feature CSV per modality, in training order.
    #[arg(long = "data", required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Select hyperparameters by grid search inside each outer fold.
    #[arg(long)]
    pub search: bool,
    /// Grid JSON overriding the config file's `grid`; implies --search.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Report CSV.
    #[arg(long)]
    pub out_csv: PathBuf,
    /// Report JSON, readable by `report`.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridsearchArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Grid JSON overriding the config file's `grid`.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Best model config JSON, usable with --model-config.
    #[arg(long)]
    pub out_config: PathBuf,
    /// Per-cell score table CSV.
    #[arg(long)]
    pub out_table: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files written by `cv`.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
    /// Write the table here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
