use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rgm", version, about = "Train, sample and apply restoration-based generative models")]
pub struct Cli {
    /// Print progress to stderr (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the per-step operators of a degradation schedule as JSON.
    Schedule(ScheduleArgs),
    /// Train a generator from a JSON experiment file.
    Train(TrainArgs),
    /// Draw samples from a trained checkpoint.
    Sample(SampleArgs),
    /// Solve an inverse problem with a trained generator as prior.
    Invert(InvertArgs),
    /// Compare a sample file against a reference file.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    D,
    #[value(name = "sr-naive")]
    SrNaive,
    Sr,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub steps: usize,
    /// `HxWxC` for images or a single number for flat vectors.
    #[arg(long, default_value = "2")]
    pub shape: String,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory for the checkpoint, run record and metrics.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Forward,
    Posterior,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// `.json` writes an image file, anything else CSV.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = ModeArg::Forward)]
    pub mode: ModeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Denoise,
    Sr,
    Color,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Observation noise level in data units. Defaults to 40/255 for
    /// denoising and 0 otherwise.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Super-resolution factor.
    #[arg(long, default_value_t = 2)]
    pub factor: usize,
    /// Ground-truth images (JSON). Without it, toy images are generated.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Number of toy images when no input file is given.
    #[arg(long, default_value_t = 16)]
    pub n: usize,
    /// Toy image family when no input file is given
    /// (blobs, gradients, checkerboards or mixed).
    #[arg(long, default_value = "mixed")]
    pub family: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Solver outer repeats.
    #[arg(long)]
    pub m: Option<usize>,
    /// Solver fidelity weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Solver damping.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Solver inner depth.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub samples: PathBuf,
    /// Reference rows. Without it, 2D samples are compared against fresh
    /// draws from the standardised eight-Gaussian mixture.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Size of the generated mixture reference.
    #[arg(long, default_value_t = 10_000)]
    pub reference_n: usize,
    /// Seed of the generated mixture reference.
    #[arg(long, default_value_t = 1001)]
    pub reference_seed: u64,
    /// Also write the scores as a one-row CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
