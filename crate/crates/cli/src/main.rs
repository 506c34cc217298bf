//! `octofield`: fit, extract, evaluate and inspect reconstructions.

mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "-", env!("OCTOFIELD_GIT_REV"));

#[derive(Debug, Parser)]
#[command(name = "octofield", version = VERSION, about = "Surface reconstruction from unoriented point clouds")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "OCTOFIELD_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the distance and frame networks to a point cloud.
    Fit(FitArgs),
    /// Extract the zero level set of a checkpoint as a mesh.
    Extract(ExtractArgs),
    /// Chamfer, Hausdorff and F-score between two meshes or clouds.
    Eval(EvalArgs),
    /// Tabulate a frame-alignment loss over sphere directions.
    Manifold(ManifoldArgs),
    /// Write frame glyphs recovered from a checkpoint's frame network.
    Frames(FramesArgs),
    /// Run the built-in oracle checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PresetArg {
    Desk,
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseArg {
    Low,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FixtureArg {
    /// 5000 points on the unit sphere.
    Sphere,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input cloud or mesh (.xyz, .txt, .pts, .ply, .obj).
    #[arg(required_unless_present = "fixture", conflicts_with = "fixture")]
    pub input: Option<PathBuf>,
    /// Use a built-in cloud instead of an input file.
    #[arg(long, value_enum)]
    pub fixture: Option<FixtureArg>,
    /// Directory receiving checkpoint.bin, loss.csv and run.toml.
    #[arg(short, long, default_value = "run")]
    pub output: PathBuf,
    /// TOML configuration; keys it omits come from its preset.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Preset used when no configuration file is given.
    #[arg(long, value_enum, conflicts_with = "config")]
    pub preset: Option<PresetArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Noise regime selecting the default weights and milestones.
    #[arg(long, value_enum)]
    pub noise: Option<NoiseArg>,
    #[arg(long)]
    pub lambda_positional: Option<f64>,
    #[arg(long)]
    pub lambda_nsh: Option<f64>,
    #[arg(long)]
    pub lambda_nsh_annealed: Option<f64>,
    #[arg(long)]
    pub lambda_eikonal: Option<f64>,
    #[arg(long)]
    pub lambda_off: Option<f64>,
    #[arg(long)]
    pub lambda_align: Option<f64>,
    #[arg(long)]
    pub lambda_regularize: Option<f64>,
    #[arg(long)]
    pub lambda_lip: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    pub checkpoint: PathBuf,
    /// Output mesh; the extension selects OBJ or binary PLY.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Samples per axis of the extraction grid (at least 8).
    #[arg(short, long, default_value_t = 128)]
    pub resolution: usize,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reconstruction (mesh or cloud).
    pub a: PathBuf,
    /// Reference (mesh or cloud); also sets the default threshold.
    pub b: PathBuf,
    /// Points sampled from each mesh input; clouds are used as given.
    #[arg(short = 'n', long, default_value_t = 100_000)]
    pub samples: usize,
    /// F-score threshold; defaults to 0.5% of the reference bounding-box diagonal.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Average squared instead of plain nearest distances in the Chamfer term.
    #[arg(long)]
    pub squared: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON report here instead of standard output.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    L1,
    L2,
    Cosine,
}

#[derive(Debug, Args)]
pub struct ManifoldArgs {
    #[arg(long, value_enum, default_value = "l1")]
    pub loss: LossArg,
    /// Number of sphere directions.
    #[arg(short, long, default_value_t = 10_000)]
    pub resolution: usize,
    /// CSV output (`x,y,z,value`); standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FramesArgs {
    pub checkpoint: PathBuf,
    /// Points at which to place glyphs.
    pub cloud: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Use every `stride`-th point.
    #[arg(long, default_value_t = 10)]
    pub stride: usize,
    /// Glyph half length; defaults to 1% of the cloud's bounding-box diagonal.
    #[arg(long)]
    pub length: Option<f64>,
    /// Distance to the octahedral variety above which a glyph is flagged.
    #[arg(long, default_value_t = 0.05)]
    pub residual_threshold: f64,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Corrupt the fixed rotation matrix; the Wigner checks must then fail.
    #[arg(long)]
    pub negative_control: bool,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(CliError::runtime)?;
    }
    match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Extract(a) => commands::extract(a),
        Command::Eval(a) => commands::eval(a),
        Command::Manifold(a) => commands::manifold(a),
        Command::Frames(a) => commands::frames(a),
        Command::Selftest(a) => commands::selftest(a),
    }
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors and 0 for --help/--version.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
