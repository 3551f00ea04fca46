use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use vews_core::{AutoencoderConfig, FeatureMode, ModelConfig, ModelKind};

pub const DEFAULT_OUT: &str = "vews-out";

/// Vandal early-warning pipeline over edit logs.
#[derive(Debug, Parser)]
#[command(name = "vews", version)]
pub struct Cli {
    /// Output directory (also the default input directory).
    #[arg(long, env = "VEWS_OUT", global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Load the input files and report what was read.
    Validate(InputArgs),
    /// Per-class editing behavior statistics.
    Stats(InputArgs),
    /// Export per-user feature vectors as CSV.
    Featurize(FeaturizeArgs),
    /// Fit the autoencoder and classifier on every labeled user.
    Train(TrainArgs),
    /// Run an evaluation protocol and write JSON/CSV reports.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic corpus.
    Simulate(SimulateArgs),
    /// Randomized-tree importance of the hand-crafted features.
    Importance(ImportanceArgs),
    /// Re-execute the run recorded in a manifest.
    #[serde(skip)]
    Rerun(RerunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Stats(_) => "stats",
            Command::Featurize(_) => "featurize",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Simulate(_) => "simulate",
            Command::Importance(_) => "importance",
            Command::Rerun(_) => "rerun",
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Directory holding edits.jsonl, labels.csv and optionally links.tsv
    /// [default: the output directory]
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Edit log (JSON lines).
    #[arg(long)]
    pub edits: Option<PathBuf>,
    /// User labels (CSV).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Page link graph (TSV).
    #[arg(long)]
    pub links: Option<PathBuf>,
    /// Do not look for a link graph in the data directory.
    #[arg(long)]
    pub no_links: bool,
    /// Revert records (CSV). Never picked up implicitly.
    #[arg(long)]
    pub reverts: Option<PathBuf>,
}

/// Input paths after defaults are applied.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub edits: PathBuf,
    pub labels: PathBuf,
    pub links: Option<PathBuf>,
    pub reverts: Option<PathBuf>,
}

impl InputArgs {
    pub fn resolve(&self, out: &Path) -> std::io::Result<Inputs> {
        let dir = self.data.clone().unwrap_or_else(|| out.to_path_buf());
        let links = match (&self.links, self.no_links) {
            (Some(p), _) => Some(p.clone()),
            (None, true) => None,
            (None, false) => Some(dir.join("links.tsv")).filter(|p| p.is_file()),
        };
        Ok(Inputs {
            edits: std::path::absolute(self.edits.clone().unwrap_or_else(|| dir.join("edits.jsonl")))?,
            labels: std::path::absolute(self.labels.clone().unwrap_or_else(|| dir.join("labels.csv")))?,
            links: links.map(std::path::absolute).transpose()?,
            reverts: self.reverts.clone().map(std::path::absolute).transpose()?,
        })
    }
}

impl From<&Inputs> for InputArgs {
    fn from(i: &Inputs) -> Self {
        InputArgs {
            data: None,
            edits: Some(i.edits.clone()),
            labels: Some(i.labels.clone()),
            links: i.links.clone(),
            no_links: i.links.is_none(),
            reverts: i.reverts.clone(),
        }
    }
}

/// Model and autoencoder hyperparameters shared by fitting commands.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// Classifier.
    #[arg(long, default_value = "svm")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Autoencoder hidden units.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Autoencoder training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Autoencoder learning rate.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Autoencoder mini-batch size.
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub svm_lambda: Option<f64>,
    #[arg(long)]
    pub svm_epochs: Option<usize>,
    /// Trees in the random forest.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Neighbors for kNN.
    #[arg(long)]
    pub knn_k: Option<usize>,
}

impl FitArgs {
    pub fn autoencoder(&self) -> AutoencoderConfig {
        let mut c = AutoencoderConfig::default();
        if let Some(v) = self.hidden {
            c.hidden = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.rate {
            c.rate = v;
        }
        if let Some(v) = self.momentum {
            c.momentum = v;
        }
        if let Some(v) = self.batch {
            c.batch = v;
        }
        c
    }

    pub fn model_config(&self) -> ModelConfig {
        let mut c = ModelConfig::default();
        if let Some(v) = self.svm_lambda {
            c.svm_lambda = v;
        }
        if let Some(v) = self.svm_epochs {
            c.svm_epochs = v;
        }
        if let Some(v) = self.trees {
            c.forest.n_trees = v;
        }
        if let Some(v) = self.knn_k {
            c.knn_k = v;
        }
        c
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FeaturizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "wvb")]
    pub features: FeatureMode,
    /// Use only each user's first k edits.
    #[arg(long)]
    pub k: Option<usize>,
    /// Also write the per-edit-pair table.
    #[arg(long)]
    pub pairs: bool,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "vews")]
    pub features: FeatureMode,
    #[arg(long)]
    pub k: Option<usize>,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolName {
    Cv10,
    Temporal,
    Window,
    #[value(name = "first_k")]
    FirstK,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "cv10")]
    pub protocol: ProtocolName,
    /// Comma-separated feature modes; two or more add paired McNemar tests.
    #[arg(long, value_delimiter = ',', default_value = "vews")]
    pub features: Vec<FeatureMode>,
    #[command(flatten)]
    pub fit: FitArgs,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Months of training data before each test month (temporal).
    #[arg(long, default_value_t = 3)]
    pub window: u32,
    /// Test month as YYYY-MM (window); defaults to the last month with data.
    #[arg(long)]
    pub test_month: Option<String>,
    /// Largest training window in months (window).
    #[arg(long, default_value_t = 12)]
    pub n_max: u32,
    /// Comma-separated edit cutoffs (first_k).
    #[arg(long, value_delimiter = ',')]
    pub ks: Vec<usize>,
    /// Also retrain every split with shuffled test labels and compare artifacts.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    /// Total users, split evenly between the classes.
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generator parameters (JSON); defaults to the built-in calibration.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Hand-crafted feature set (wvb or wvb_wr).
    #[arg(long, default_value = "wvb")]
    pub features: FeatureMode,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 250)]
    pub trees: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}
