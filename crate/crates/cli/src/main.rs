//! `chronicity`: file-based batch interface to the quantification pipeline
//! and its evaluation statistics.
//!
//! Every command reads all of its inputs before writing anything, so a
//! missing or malformed input leaves no partial outputs behind.

mod config;
mod eval;
mod raster;
mod report;
mod score;
mod survival;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "chronicity", version, about = "Chronicity-index quantification from renal segmentation label rasters")]
struct Cli {
    /// Master seed for every random stream (bootstrap, synthesis).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (or output file for `stitch`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Run configuration JSON; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Split a label raster into fixed-size patches plus a manifest.
    Tile(raster::TileArgs),
    /// Reassemble a tiled slide into one raster.
    Stitch(raster::StitchArgs),
    /// Fuse per-class binary masks into a label raster.
    Fuse(raster::FuseArgs),
    /// Features and chronicity scores for one or more patients.
    Score(score::ScoreArgs),
    /// Segmentation and agreement statistics.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
    /// Survival and outcome statistics on a cohort CSV.
    #[command(subcommand)]
    Survival(survival::SurvivalCommand),
    /// Generate synthetic slides or cohorts.
    #[command(subcommand)]
    Synth(synth::SynthCommand),
}

/// A failed run: exit code plus the message printed to stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_INPUT: u8 = 1;
pub const EXIT_COMPUTATION: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

impl Failure {
    pub fn input(message: impl Into<String>) -> Failure {
        Failure { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<chronicity::Error> for Failure {
    fn from(e: chronicity::Error) -> Self {
        let code = if e.is_input_error() { EXIT_INPUT } else { EXIT_COMPUTATION };
        Failure { code, message: e.to_string() }
    }
}

/// Settings shared by all commands after merging the config file and
/// global flags.
pub struct Context {
    pub config: RunConfig,
    pub config_path: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Whether `--seed` was given explicitly.
    pub seed_flag: bool,
}

impl Context {
    pub fn out_path(&self) -> Result<&PathBuf, Failure> {
        self.out.as_ref().ok_or_else(|| Failure::input("--out is required"))
    }
}

/// Outcome of a command that ran to completion: `Ok(true)` if some items
/// failed while others succeeded.
pub type Outcome = Result<bool, Failure>;

fn run(cli: Cli) -> Outcome {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::input("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure { code: EXIT_COMPUTATION, message: format!("thread pool: {e}") })?;
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let mut ctx = Context { config, config_path: cli.config, out: cli.out, seed_flag: cli.seed.is_some() };
    match cli.command {
        Command::Tile(args) => raster::tile(&mut ctx, args),
        Command::Stitch(args) => raster::stitch(&mut ctx, args),
        Command::Fuse(args) => raster::fuse(&mut ctx, args),
        Command::Score(args) => score::run(&mut ctx, args),
        Command::Eval(cmd) => eval::run(&mut ctx, cmd),
        Command::Survival(cmd) => survival::run(&mut ctx, cmd),
        Command::Synth(cmd) => synth::run(&mut ctx, cmd),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_PARTIAL),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
