use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug, Clone)]
#[command(
    name = "wavefront-lab",
    version,
    about = "Traveling wavefronts: shooting, threshold speed, PDE checks"
)]
#[command(args_override_self = true)]
pub struct Cli {
    /// `key = value` file whose entries act as flags; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Integrate a front at (D, c), verify it, write CSV and a JSON sidecar.
    Profile(RunConfig),
    /// Bracket the threshold speed c₀(D).
    Threshold(RunConfig),
    /// Solve the auxiliary problem at σ (default: σ*).
    Aux(AuxArgs),
    /// Fixed-point semi-wavefront on the left half-line, compared with the profile.
    Semiwave(RunConfig),
    /// Explicit PDE run from step data; fits the front speed.
    Pde(PdeArgs),
    /// Run the profile checks, on a fresh profile or on saved files.
    Verify(VerifyArgs),
    /// Threshold brackets for several D, computed concurrently.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    #[arg(long = "D")]
    pub d: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    /// Launch value of η on the unstable manifold.
    #[arg(long)]
    pub eta0: Option<f64>,
    /// Integration horizon in ξ.
    #[arg(long = "xi-max")]
    pub xi_max: Option<f64>,
    /// Bracket width for threshold; relative tolerance elsewhere.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output prefix; extensions are added per file.
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Also write SVG plots next to the outputs.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Args, Debug, Clone)]
pub struct AuxArgs {
    #[command(flatten)]
    pub run: RunConfig,
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct PdeArgs {
    #[command(flatten)]
    pub run: RunConfig,
    #[arg(long, default_value_t = 100.0)]
    pub length: f64,
    #[arg(long = "t-max", default_value_t = 80.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 4096)]
    pub cells: usize,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub run: RunConfig,
    /// Prefix of a saved profile (`PREFIX.csv` and `PREFIX.json`).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Comma-separated diffusivities.
    #[arg(long = "D", value_delimiter = ',', num_args = 1..)]
    pub d: Vec<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long = "out")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub plot: bool,
}
