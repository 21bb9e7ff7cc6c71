//! `depthscout`: phantoms, depth rendering, label cleanup, training,
//! prediction, baselines and evaluation from one binary.

mod commands;
mod config;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

const DEFAULTS: &str = "\
Defaults: intensity threshold 0.02, depth cutoff 0.3, loss weights 0.5/0.5 (Dice/BCE), \
learning rate 0.001, 1000 warmup steps, 15000 total steps at full scale (2000 at desk scale), \
batch size 8.

Each command accepts --config FILE (JSON); flags override the file. The resolved
configuration is written next to the outputs as <command>_config.json and can be
passed back with --config to repeat the run.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.";

#[derive(Parser, Debug)]
#[command(name = "depthscout", version, about = "Organ localization from a single depth image", after_help = DEFAULTS)]
pub struct Cli {
    /// Worker threads for per-sample work; outputs do not depend on it
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate synthetic phantoms (intensity and label volumes) plus a manifest
    Phantom(PhantomArgs),
    /// Render a simulated depth image for every intensity volume in a manifest
    Depth(DepthArgs),
    /// Merge label volumes by priority and clean up every structure
    Labels(LabelsArgs),
    /// Train the volumetric network on a manifest with depth images and labels
    Train(TrainArgs),
    /// Predict label volumes for every depth image in a manifest
    Predict(PredictArgs),
    /// Fit a reference method and optionally predict a test manifest
    #[command(subcommand)]
    Baseline(Baseline),
    /// Score predictions against ground truth
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of phantoms
    #[arg(long)]
    pub n: Option<usize>,
    /// Seed of the first phantom; phantom i uses seed + i
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Grid size LR,AP,SI [default: 64,32,64]
    #[arg(long, value_delimiter = ',')]
    pub shape: Option<Vec<usize>>,
    /// Voxel spacing in mm, LR,AP,SI [default: 7,10,12]
    #[arg(long, value_delimiter = ',')]
    pub spacing: Option<Vec<f64>>,
    /// Number of labelled structures, at most 41 [default: 8]
    #[arg(long)]
    pub n_organs: Option<usize>,
    /// Additive intensity noise amplitude [default: 0.05]
    #[arg(long)]
    pub noise: Option<f64>,
    /// Body size range MIN,MAX as torso scale factors [default: 0.8,1.2]
    #[arg(long, value_delimiter = ',')]
    pub body_scale: Option<Vec<f64>>,
}

#[derive(Args, Debug)]
pub struct DepthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset directory or manifest file
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Body threshold on normalized intensity, strict [default: 0.02]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Depth values below this become 0 [default: 0.3]
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Radius of the binary body opening in voxels [default: 1]
    #[arg(long)]
    pub body_radius: Option<usize>,
    /// Radius of the grayscale depth opening in pixels [default: 1]
    #[arg(long)]
    pub depth_radius: Option<usize>,
}

#[derive(Args, Debug)]
pub struct LabelsArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Label volume; repeat for more, highest priority first
    #[arg(long = "source")]
    pub sources: Vec<PathBuf>,
    /// Output label volume
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip hole filling
    #[arg(long)]
    pub no_fill_holes: bool,
    /// Drop components smaller than this fraction of the largest [default: 0.1]
    #[arg(long)]
    pub min_fraction: Option<f64>,
}

/// Optimization flags shared by every trained model.
#[derive(Args, Debug)]
pub struct TrainFlags {
    /// Seed for initialization, batch order and augmentation
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learning rate reached after warmup [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Linear warmup steps [default: 1000]
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    /// Total steps; cosine annealing to zero ends here [default: 2000 at desk scale; 15000 at full scale]
    #[arg(long)]
    pub total_steps: Option<usize>,
    /// Samples per step [default: 8]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Weight of the Dice term; the BCE weight becomes 1 - this [default: 0.5]
    #[arg(long)]
    pub w_dice: Option<f64>,
    /// Weight of the BCE term; the Dice weight becomes 1 - this [default: 0.5]
    #[arg(long)]
    pub w_bce: Option<f64>,
    /// Disable shift/scale/rotate augmentation
    #[arg(long)]
    pub no_augment: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset directory or manifest file
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for the checkpoint and training log
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
    /// Continue from this checkpoint
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stop after this step (the schedule still spans the total)
    #[arg(long)]
    pub stop_at: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Dataset directory or manifest with depth images
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory for predicted label volumes and their manifest
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Baseline {
    /// Voxel-wise label frequency thresholded at half its maximum
    Mean(MeanArgs),
    /// Three plane networks whose projected extents are combined into boxes
    Proj25d(ProjectionArgs),
}

#[derive(Args, Debug)]
pub struct MeanArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset directory or manifest
    #[arg(long = "train")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset to write predictions for
    #[arg(long)]
    pub predict: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProjectionArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Training dataset directory or manifest, with depth images
    #[arg(long = "train")]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Dataset to write predicted boxes for
    #[arg(long)]
    pub predict: Option<PathBuf>,
    #[command(flatten)]
    pub train: TrainFlags,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Prediction dataset directory or manifest
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Ground-truth dataset directory or manifest
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Report directory [default: the prediction directory]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Score raw predictions without connected-component cleanup
    #[arg(long)]
    pub no_postprocess: bool,
    /// Cleanup drops components below this fraction of the largest [default: 0.1]
    #[arg(long)]
    pub min_fraction: Option<f64>,
    /// JSON file mapping group names to label lists, e.g. bilateral organs
    #[arg(long)]
    pub groups: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_well_formed() {
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_count_is_a_usage_error() {
        let e = Cli::try_parse_from(["depthscout", "phantom", "--n", "-1"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
