//! `simvox` — one binary wiring the pipeline: token codec, representation
//! comparison, refiner training and sampling, segmentation, URDF/MJCF
//! export, bundle validation, and geometry metrics.
//!
//! Configuration precedence for shared knobs is flags, then `SIMVOX_*`
//! environment variables, then the JSON file given via `--config` /
//! `SIMVOX_CONFIG`, then built-in defaults. Every stochastic path is driven
//! by `--seed`; repeated runs with the same seed produce byte-identical
//! outputs.
//!
//! Exit codes: 0 success, 1 operational or validation failure, 2 usage
//! error.

mod commands;
mod formats;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use simvox_core::voxel::VoxelizeMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "simvox", version, about = "Sim-ready articulated asset toolchain")]
struct Cli {
    /// JSON file with default values for shared flags (seed, res, mode,
    /// digit_group, samples, tau).
    #[arg(long, global = true, env = "SIMVOX_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ModeArg {
    Surface,
    Solid,
}

impl From<ModeArg> for VoxelizeMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Surface => VoxelizeMode::Surface,
            ModeArg::Solid => VoxelizeMode::Solid,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize a mesh (or load a grid) and write its merged-run token file.
    Encode(EncodeArgs),
    /// Decode a token file back into an explicit voxel grid JSON.
    Decode(DecodeArgs),
    /// Compare token counts across the five serializations of a mesh.
    CompareTokens(CompareArgs),
    /// Train the coarse-to-fine occupancy refiner on mesh-derived pairs.
    TrainRefiner(TrainArgs),
    /// Sample fine occupancy from a trained refiner given a coarse grid.
    Refine(RefineArgs),
    /// Nearest-neighbor part segmentation of a mesh against labeled voxels.
    Segment(SegmentArgs),
    /// Export an asset to URDF + MJCF + per-part meshes + manifest.
    Export(ExportArgs),
    /// Validate an exported bundle on disk.
    Validate(ValidateArgs),
    /// Geometry metrics between a predicted and a ground-truth mesh.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct EncodeArgs {
    /// Input mesh (OBJ subset); normalized automatically.
    #[arg(long, conflicts_with = "grid", required_unless_present = "grid")]
    mesh: Option<PathBuf>,
    /// Input grid JSON as written by `decode`.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Grid resolution.
    #[arg(long, env = "SIMVOX_RES")]
    res: Option<u32>,
    /// Voxelization rule for meshes.
    #[arg(long, value_enum, env = "SIMVOX_MODE")]
    mode: Option<ModeArg>,
    /// Output token file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input token file.
    #[arg(long)]
    tokens: PathBuf,
    /// Resolution the tokens were encoded at.
    #[arg(long, env = "SIMVOX_RES")]
    res: Option<u32>,
    /// Output grid JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Input mesh (OBJ subset); normalized automatically.
    #[arg(long)]
    mesh: PathBuf,
    /// Grid resolution.
    #[arg(long, env = "SIMVOX_RES")]
    res: Option<u32>,
    /// Voxelization rule.
    #[arg(long, value_enum, env = "SIMVOX_MODE")]
    mode: Option<ModeArg>,
    /// Digit-run chunk size of the tokenizer model.
    #[arg(long, env = "SIMVOX_DIGIT_GROUP")]
    digit_group: Option<usize>,
    /// Output CSV (representation,tokens,ratio).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training config JSON (fields of the refiner TrainConfig; missing
    /// fields take defaults).
    #[arg(long)]
    config_file: Option<PathBuf>,
    /// Meshes voxelized at the fine resolution then downsampled to coarse.
    #[arg(long, num_args = 1.., required = true)]
    meshes: Vec<PathBuf>,
    /// Voxelization rule for the fine grids.
    #[arg(long, value_enum, env = "SIMVOX_MODE")]
    mode: Option<ModeArg>,
    /// Seed override.
    #[arg(long, env = "SIMVOX_SEED")]
    seed: Option<u64>,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Loss curve CSV.
    #[arg(long)]
    loss_curve: Option<PathBuf>,
}

#[derive(Args)]
struct RefineArgs {
    /// Trained checkpoint.
    #[arg(long)]
    model: PathBuf,
    /// Coarse token file (at the model's coarse resolution).
    #[arg(long)]
    coarse: PathBuf,
    /// Euler integration steps.
    #[arg(long, default_value_t = 8)]
    steps: usize,
    /// Seed for the Gaussian start state.
    #[arg(long, env = "SIMVOX_SEED")]
    seed: Option<u64>,
    /// Output token file at the fine resolution.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    /// Mesh to segment (normalized automatically).
    #[arg(long)]
    mesh: PathBuf,
    /// Asset spec JSON; labels are assembled from its part geometries.
    #[arg(long, conflicts_with = "labels", required_unless_present = "labels")]
    spec: Option<PathBuf>,
    /// Labels JSON as an alternative to --spec.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Directory for part_<id>.obj outputs.
    #[arg(long)]
    out_dir: PathBuf,
    /// Also write the labels actually used as JSON.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Asset spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Optional fine mesh; segmented against the spec's parts (or --labels)
    /// and used as link geometry instead of voxel cuboids.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Labels JSON overriding spec-derived labels for --mesh segmentation.
    #[arg(long, requires = "mesh")]
    labels: Option<PathBuf>,
    /// Output bundle directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Bundle directory written by `export`.
    #[arg(long)]
    bundle: PathBuf,
    /// Optional JSON report path.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Predicted mesh.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth mesh.
    #[arg(long)]
    gt: PathBuf,
    /// Voxel resolution for the IoU metric.
    #[arg(long, env = "SIMVOX_RES")]
    res: Option<u32>,
    /// Surface samples per mesh for Chamfer distance and F-score.
    #[arg(long, env = "SIMVOX_SAMPLES")]
    samples: Option<usize>,
    /// F-score distance threshold; defaults to 5% of the ground-truth
    /// bounding-box diagonal.
    #[arg(long, env = "SIMVOX_TAU")]
    tau: Option<f64>,
    /// Sampling seed.
    #[arg(long, env = "SIMVOX_SEED")]
    seed: Option<u64>,
    /// Predicted absolute extents in meters, e.g. "0.5,0.4,1.2".
    #[arg(long)]
    pred_extents: Option<String>,
    /// Ground-truth absolute extents in meters.
    #[arg(long)]
    gt_extents: Option<String>,
    /// Output JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV report.
    #[arg(long)]
    csv: Option<PathBuf>,
}

/// Defaults loaded from the optional config file.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileDefaults {
    seed: Option<u64>,
    res: Option<u32>,
    mode: Option<String>,
    digit_group: Option<usize>,
    samples: Option<usize>,
    tau: Option<f64>,
}

impl FileDefaults {
    fn load(path: Option<&PathBuf>) -> anyhow::Result<Self> {
        match path {
            None => Ok(FileDefaults::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| anyhow::anyhow!("reading config {}: {e}", p.display()))?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }

    fn mode(&self) -> Option<ModeArg> {
        match self.mode.as_deref() {
            Some("surface") => Some(ModeArg::Surface),
            Some("solid") => Some(ModeArg::Solid),
            _ => None,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let defaults = FileDefaults::load(cli.config.as_ref())?;
    match cli.command {
        Command::Encode(args) => commands::encode(args, &defaults),
        Command::Decode(args) => commands::decode(args, &defaults),
        Command::CompareTokens(args) => commands::compare_tokens(args, &defaults),
        Command::TrainRefiner(args) => commands::train_refiner(args, &defaults),
        Command::Refine(args) => commands::refine(args, &defaults),
        Command::Segment(args) => commands::segment(args),
        Command::Export(args) => commands::export(args),
        Command::Validate(args) => commands::validate(args),
        Command::Metrics(args) => commands::metrics(args, &defaults),
    }
}
