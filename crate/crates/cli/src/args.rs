use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "eeatc", version, about = "Two-phase calibration of low-cost air-quality sensors")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run configuration. Flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for every file the run writes.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Base seed. Defaults to the config file value, then $EEATC_SEED, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub n_trees: Option<usize>,
    #[arg(long)]
    pub mtry: Option<usize>,
    #[arg(long)]
    pub min_samples_leaf: Option<usize>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Loss-estimator backbone: forest or linear.
    #[arg(long)]
    pub nanny_backbone: Option<String>,
    /// Fraction of training rows reserved for fitting the loss estimator.
    #[arg(long)]
    pub nanny_holdout: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// train_only or full.
    #[arg(long)]
    pub normalize_scope: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Raw CSV to cleaned canonical CSV plus a drop report.
    Ingest {
        #[arg(long, num_args = 1..)]
        input: Vec<PathBuf>,
        /// mobile or stationary.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Fit one model on a seeded training split.
    Train {
        #[arg(long)]
        input: Option<PathBuf>,
        /// mlr, rf or eeatc.
        #[arg(long, default_value = "eeatc")]
        model: String,
        /// Comma-separated feature list, e.g. `s,t,rh`.
        #[arg(long)]
        features: Option<String>,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        model_args: ModelArgs,
    },
    /// Calibrate a feature CSV; reference values are not needed.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
    },
    /// Score a model against a labelled CSV.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// `split.json` written by `train`; restricts scoring to test rows.
        #[arg(long)]
        split: Option<PathBuf>,
        /// normalized or raw.
        #[arg(long)]
        metric_space: Option<String>,
    },
    /// Every model on every feature subset over repeated splits.
    Sweep {
        #[arg(long, conflicts_with = "scenario")]
        input: Option<PathBuf>,
        /// Generate the data instead of reading it.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Feature subset; repeat for several.
        #[arg(long)]
        features: Vec<String>,
        /// Comma-separated model kinds.
        #[arg(long, value_delimiter = ',')]
        models: Vec<String>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        metric_space: Option<String>,
        #[arg(long)]
        keep_predictions: bool,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        model_args: ModelArgs,
    },
    /// Write a synthetic fixture CSV and its noise sidecar.
    Synth {
        /// noiseless, mobile, heteroscedastic, humid_noise or lagged.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Seconds between samples: 1 or 60.
        #[arg(long)]
        resolution: Option<i64>,
    },
}
