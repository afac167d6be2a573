mod commands;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hea_dvae::data::{SplitName, SplitSizes};
use hea_dvae::design::GridAxis;
use hea_dvae::dvae::DvaeConfig;

use crate::error::CliError;

#[derive(Parser)]
#[command(
    name = "hea-dvae",
    version,
    about = "Semi-supervised VAE workflows for single-phase high-entropy alloy design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model per seed and summarize test metrics.
    Train(TrainArgs),
    /// Accuracy, AUC and ROC curve of a checkpoint on one split.
    Eval(EvalArgs),
    /// Reconstruct every alloy of a split and report composition MAE.
    Reconstruct(ReconstructArgs),
    /// Rank candidate alloys by single-phase probability.
    Screen(ScreenArgs),
    /// Decode one latent point at a target probability.
    Generate(GenerateArgs),
    /// Iteratively flip an alloy toward single phase.
    Invert(InvertArgs),
    /// Decode a grid of latent points at several target probabilities.
    Grid(GridArgs),
    /// Kernel SHAP attributions of the classifier over a split.
    Shap(ShapArgs),
    /// Encode a dataset into the latent plane with a density estimate.
    LatentMap(LatentMapArgs),
    /// Semi-supervised versus classifier-only accuracy at several label budgets.
    Baseline(BaselineArgs),
    /// Serve the HTTP API for a checkpoint.
    Serve(ServeArgs),
    /// Write the bundled surrogate dataset.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
pub struct TableArgs {
    /// Element property CSV replacing the bundled table.
    #[arg(long, requires = "pairs")]
    pub elements: Option<PathBuf>,
    /// Pair enthalpy CSV replacing the bundled table.
    #[arg(long, requires = "elements")]
    pub pairs: Option<PathBuf>,
}

#[derive(Args, Clone)]
pub struct HyperArgs {
    #[arg(long, default_value_t = 20_000)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 200)]
    pub patience: u32,
    #[arg(long, default_value_t = 1e-7)]
    pub min_lr: f64,
    #[arg(long, default_value_t = 2)]
    pub latent_dim: usize,
    #[arg(long, value_delimiter = ',', default_value = "100,100")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value_t = 40.0)]
    pub composition_count: f64,
    /// Bernoulli prior on single phase; defaults to the labelled SP rate.
    #[arg(long)]
    pub phase_prior_r: Option<f64>,
    #[arg(long, default_value_t = 0.6)]
    pub sp_cutoff: f64,
}

impl HyperArgs {
    pub fn config(&self, seed: u64) -> DvaeConfig {
        DvaeConfig {
            latent_dim: self.latent_dim,
            hidden: self.hidden.clone(),
            gamma: self.gamma,
            phase_prior_r: self.phase_prior_r,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            lr0: self.lr,
            patience: self.patience,
            min_lr: self.min_lr,
            seed,
            sp_cutoff: self.sp_cutoff,
            composition_count: self.composition_count,
        }
    }
}

#[derive(Args, Clone)]
pub struct SizeArgs {
    #[arg(long, default_value_t = 864)]
    pub labelled: usize,
    #[arg(long, default_value_t = 296)]
    pub unlabelled: usize,
    #[arg(long, default_value_t = 75)]
    pub validation: usize,
    #[arg(long, default_value_t = 138)]
    pub test: usize,
}

impl SizeArgs {
    pub fn sizes(&self) -> SplitSizes {
        SplitSizes {
            labelled: self.labelled,
            unlabelled: self.unlabelled,
            validation: self.validation,
            test: self.test,
        }
    }
}

#[derive(Args, Clone)]
pub struct SeedArgs {
    /// Number of seeds; runs seeds 0..n.
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    /// Explicit seeds, overriding --seeds.
    #[arg(long, value_delimiter = ',')]
    pub seed_list: Option<Vec<u64>>,
}

impl SeedArgs {
    pub fn list(&self) -> Result<Vec<u64>, CliError> {
        let seeds = match &self.seed_list {
            Some(list) => list.clone(),
            None => (0..self.seeds as u64).collect(),
        };
        if seeds.is_empty() {
            return Err(CliError::Usage("seed list is empty".into()));
        }
        Ok(seeds)
    }
}

#[derive(Args, Clone)]
pub struct CheckpointArg {
    #[arg(long, env = "DVAE_CHECKPOINT")]
    pub checkpoint: PathBuf,
}

#[derive(Args, Clone)]
pub struct DatasetArg {
    #[arg(long, default_value = "data/hea_dataset.csv")]
    pub dataset: PathBuf,
}

#[derive(Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[command(flatten)]
    pub sizes: SizeArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub tables: TableArgs,
    /// Output directory; one subdirectory per seed.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: CheckpointArg,
    #[command(flatten)]
    pub data: DatasetArg,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    /// ROC curve CSV.
    #[arg(long)]
    pub roc_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub model: CheckpointArg,
    #[command(flatten)]
    pub data: DatasetArg,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    /// Per-alloy CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// MAE histogram CSV.
    #[arg(long)]
    pub hist_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.005)]
    pub bin_width: f64,
}

#[derive(Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub model: CheckpointArg,
    /// One formula per line, or a CSV with a `formula` column.
    #[arg(long)]
    pub candidates: PathBuf,
    /// Defaults to the checkpoint's cutoff.
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: CheckpointArg,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    pub z: Vec<f64>,
    #[arg(long)]
    pub target_p: f64,
}

#[derive(Args)]
pub struct InvertArgs {
    #[command(flatten)]
    pub model: CheckpointArg,
    #[arg(long)]
    pub formula: String,
    #[arg(long, default_value_t = 0.6)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 20)]
    pub max_iters: usize,
    /// Full trace as JSON.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub model: CheckpointArg,
    /// `start:end:count`, endpoints included.
    #[arg(long, allow_hyphen_values = true)]
    pub z1: GridAxis,
    #[arg(long, allow_hyphen_values = true)]
    pub z2: GridAxis,
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    pub targets: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ShapArgs {
    #[command(flatten)]
    pub model: CheckpointArg,
    #[command(flatten)]
    pub data: DatasetArg,
    #[arg(long, default_value = "test")]
    pub split: SplitName,
    #[arg(long, default_value = "labelled")]
    pub background: SplitName,
    #[arg(long, default_value_t = 256)]
    pub max_background: usize,
    #[arg(long, default_value_t = 0)]
    pub background_seed: u64,
    #[arg(long)]
    pub csv_out: PathBuf,
    /// Beeswarm JSON.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct LatentMapArgs {
    #[command(flatten)]
    pub model: CheckpointArg,
    #[command(flatten)]
    pub data: DatasetArg,
    #[arg(long, default_value = "all")]
    pub split: SplitName,
    #[arg(long, default_value_t = 80)]
    pub grid: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    /// Equimolar quaternary clouds of the default element groups, as JSON.
    #[arg(long)]
    pub groups_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub data: DatasetArg,
    #[command(flatten)]
    pub seeds: SeedArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    #[command(flatten)]
    pub tables: TableArgs,
    /// Labelled-set sizes to compare.
    #[arg(long, value_delimiter = ',', default_value = "247,864")]
    pub labelled: Vec<usize>,
    /// Unlabelled-set size paired with each labelled size.
    #[arg(long, value_delimiter = ',', default_value = "790,296")]
    pub unlabelled: Vec<usize>,
    #[arg(long, default_value_t = 75)]
    pub validation: usize,
    #[arg(long, default_value_t = 138)]
    pub test: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, env = "DVAE_CHECKPOINT")]
    pub checkpoint: Option<PathBuf>,
    /// Dataset for the latent map and the SHAP background.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "data/hea_dataset.csv")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1373)]
    pub rows: usize,
    #[arg(long, default_value_t = 20_240_601)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Reconstruct(a) => commands::reconstruct(a),
        Command::Screen(a) => commands::screen(a),
        Command::Generate(a) => commands::generate(a),
        Command::Invert(a) => commands::invert(a),
        Command::Grid(a) => commands::grid(a),
        Command::Shap(a) => commands::shap(a),
        Command::LatentMap(a) => commands::latent_map(a),
        Command::Baseline(a) => commands::baseline(a),
        Command::Serve(a) => commands::serve(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit_code()
        }
    }
}
