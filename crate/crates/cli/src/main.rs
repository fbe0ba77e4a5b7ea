//! `eit`: mesh generation, forward simulation, subspace and multi-frequency
//! reconstruction from the command line.

mod commands;
mod config;
mod error;
mod image;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use error::{CliResult, EXIT_USAGE};

#[derive(Parser, Debug)]
#[command(name = "eit", version, about = "Impedance tomography toolkit")]
pub struct Cli {
    /// Key/value config file; explicit flags override its values.
    #[arg(long, global = true)]
    pub config: Option<String>,

    /// Seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate or check mesh files.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Solve the forward problem and write electrode voltages.
    Forward(ForwardArgs),
    /// Rebuild the four-channel resistor-circle experiment and check its claims.
    Repro(ReproArgs),
    /// Reconstruct from measurements.
    #[command(subcommand)]
    Reconstruct(ReconstructCommand),
    /// Generate a synthetic measurement ensemble.
    Ensemble(EnsembleArgs),
    /// Rasterize a phantom description into an element conductivity CSV.
    Phantom(PhantomArgs),
}

#[derive(Subcommand, Debug)]
pub enum MeshCommand {
    /// Write a refined disk mesh.
    Gen(MeshGenArgs),
    /// Check a mesh file and print the validation report.
    Validate {
        path: String,
    },
}

#[derive(Args, Debug)]
pub struct MeshGenArgs {
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub refine: Option<u32>,
    /// Number of evenly spaced electrodes (default: every boundary node).
    #[arg(long)]
    pub electrodes: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct ForwardArgs {
    #[arg(long)]
    pub mesh: Option<String>,
    /// Conductivity CSV with a `sigma` column, one row per element.
    #[arg(long, conflicts_with = "uniform")]
    pub sigma: Option<String>,
    /// Uniform conductivity for every element.
    #[arg(long)]
    pub uniform: Option<f64>,
    /// Pattern file of `id current` lines.
    #[arg(long)]
    pub pattern: Option<String>,
    /// Grounded node id.
    #[arg(long)]
    pub ground: Option<usize>,
    /// Electrode whose voltage is subtracted from every reading.
    #[arg(long)]
    pub reference: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct ReproArgs {
    /// Tolerance on the unit entries and fitting residuals.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Signal subspace dimension; the checks only apply to 3.
    #[arg(long)]
    pub d: Option<usize>,
    /// Also write the candidates to this file.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum ReconstructCommand {
    /// Subspace fit of a single statistic; reports every consistent candidate.
    Svd(SvdArgs),
    /// Stacked multi-pattern, multi-frequency recovery of the element field.
    Multifreq(MultifreqArgs),
}

#[derive(Args, Debug)]
pub struct SvdArgs {
    /// Ensemble CSV (`y0,…` columns). Without it the resistor-circle fixture is used.
    #[arg(long)]
    pub ensemble: Option<String>,
    /// correlation | covariance | cumulant:I | pooled
    #[arg(long)]
    pub statistic: Option<String>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug)]
pub struct MultifreqArgs {
    /// Sweep description file.
    #[arg(long)]
    pub sweep: Option<String>,
    /// Mesh file; defaults to the disk described in the sweep file.
    #[arg(long)]
    pub mesh: Option<String>,
    /// Output CSV of the recovered field.
    #[arg(long)]
    pub out: Option<String>,
    /// Output PGM image of the recovered field.
    #[arg(long)]
    pub image: Option<String>,
    /// Image width in pixels.
    #[arg(long)]
    pub width: Option<usize>,
    /// Also write the stacked system as PREFIX.phi.csv and PREFIX.f.csv.
    #[arg(long)]
    pub stack: Option<String>,
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    /// Phantom description: `[phantom] background` and `[inclusions]`.
    #[arg(long)]
    pub description: Option<String>,
    /// Mesh file; without it a disk is generated from --radius and --refine.
    #[arg(long)]
    pub mesh: Option<String>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub refine: Option<u32>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long)]
    pub image: Option<String>,
    #[arg(long)]
    pub width: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    /// circle (4×3 resistor-circle mixing) | random (seeded Gaussian)
    #[arg(long)]
    pub mixing: Option<String>,
    #[arg(long)]
    pub channels: Option<usize>,
    #[arg(long)]
    pub sources: Option<usize>,
    /// skewed | binary | walsh
    #[arg(long)]
    pub distribution: Option<String>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Comma-separated autoregressive coefficients for colored noise.
    #[arg(long)]
    pub ar: Option<String>,
    #[arg(long)]
    pub out: Option<String>,
}

fn run(cli: Cli) -> CliResult<()> {
    let config = cli.config.as_deref();
    let seed = cli.seed;
    match cli.command {
        Command::Mesh(MeshCommand::Gen(args)) => commands::mesh::generate(config, seed, args),
        Command::Mesh(MeshCommand::Validate { path }) => commands::mesh::validate(&path),
        Command::Forward(args) => commands::forward::run(config, seed, args),
        Command::Repro(args) => commands::repro::run(config, seed, args),
        Command::Reconstruct(ReconstructCommand::Svd(args)) => commands::svd::run(config, seed, args),
        Command::Reconstruct(ReconstructCommand::Multifreq(args)) => commands::multifreq::run(config, seed, args),
        Command::Ensemble(args) => commands::ensemble::run(config, seed, args),
        Command::Phantom(args) => commands::phantom::run(config, seed, args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let start = Instant::now();
    let outcome = run(cli);
    eprintln!("elapsed {:.3} s", start.elapsed().as_secs_f64());
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
