//! Command-line front end for the `lms` latent-manifold statistics toolkit.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};

pub use config::{sub_seed, RunConfig};
pub use error::{CliError, CliResult};
use output::{Manifest, OutDir};

#[derive(Debug, Parser)]
#[command(name = "lms", version, about = "Statistics on the latent manifolds of deep generative models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Debug, clap::Args)]
pub struct RunArgs {
    /// TOML file with RunConfig fields; flags given on the command line win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = "lms-out")]
    pub out: PathBuf,
    #[command(flatten)]
    pub overrides: RunConfig,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample Brownian-motion endpoints on the unit sphere chart.
    GenSphereData(RunArgs),
    /// Scalar curvature and smallest Ricci eigenvalue on a latent grid.
    CurvatureGrid(RunArgs),
    /// Integrate a geodesic from a velocity, or shoot one to a target.
    Geodesic(RunArgs),
    /// Parallel-transport a vector along a geodesic.
    Transport(RunArgs),
    /// Simulate Riemannian Brownian motion paths.
    Bm(RunArgs),
    /// Simulate guided bridges with their correction weights.
    Bridge(RunArgs),
    /// Monte-Carlo transition density estimate.
    Density(RunArgs),
    /// Fréchet mean of latent data.
    Frechet(RunArgs),
    /// Maximum-likelihood diffusion mean of latent data.
    Mlmean(RunArgs),
    /// Tangent-space principal geodesic analysis.
    Pga(RunArgs),
    /// Fit a metric approximator to the exact pullback metric.
    TrainMetricnet(RunArgs),
    /// Time geodesic integration under exact and learned metrics.
    Benchmark(RunArgs),
    /// Project ambient observations onto latent coordinates.
    Project(RunArgs),
}

type Handler = fn(&RunConfig, u64, &mut OutDir) -> CliResult<serde_json::Value>;

impl Command {
    fn parts(&self) -> (&'static str, &RunArgs, Handler) {
        use commands as c;
        match self {
            Command::GenSphereData(a) => ("gen-sphere-data", a, c::gen_sphere_data),
            Command::CurvatureGrid(a) => ("curvature-grid", a, c::curvature_grid),
            Command::Geodesic(a) => ("geodesic", a, c::geodesic),
            Command::Transport(a) => ("transport", a, c::transport),
            Command::Bm(a) => ("bm", a, c::bm),
            Command::Bridge(a) => ("bridge", a, c::bridge),
            Command::Density(a) => ("density", a, c::density),
            Command::Frechet(a) => ("frechet", a, c::frechet),
            Command::Mlmean(a) => ("mlmean", a, c::mlmean),
            Command::Pga(a) => ("pga", a, c::pga),
            Command::TrainMetricnet(a) => ("train-metricnet", a, c::train_metricnet),
            Command::Benchmark(a) => ("benchmark", a, c::benchmark),
            Command::Project(a) => ("project", a, c::project),
        }
    }
}

fn merged_config(args: &RunArgs) -> CliResult<RunConfig> {
    let base = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    Ok(args.overrides.over(&base))
}

/// Runs one command to completion, writing its outputs and manifest.
pub fn run(command: &Command) -> CliResult<PathBuf> {
    let started = Instant::now();
    let (name, args, handler) = command.parts();
    let cfg = merged_config(args)?;
    let mut out = OutDir::create(&args.out)?;
    let resolved = handler(&cfg, args.seed, &mut out)?;
    Manifest {
        command: name,
        seed: args.seed,
        config: &cfg,
        resolved,
        started,
    }
    .write(&mut out)?;
    Ok(args.out.clone())
}

/// Parses `LMS_THREADS`; unset means rayon's default.
pub fn thread_limit(value: Option<&str>) -> CliResult<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::config(format!("LMS_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

