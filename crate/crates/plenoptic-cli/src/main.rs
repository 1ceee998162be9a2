//! `plenoptic`: calibrate, decode, render, score and synthesize plenoptic
//! captures.

mod commands;
mod config;
mod failure;
mod imageio;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::PipelineConfig;
use failure::{exit_code, IoContext};

#[derive(Debug, Parser)]
#[command(name = "plenoptic", version, about = "Plenoptic camera calibration, decoding and refocusing")]
struct Cli {
    /// JSON run configuration; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Read and write PNG/TIFF samples as linear light instead of sRGB.
    #[arg(long, global = true)]
    linear: bool,
    /// Seed for synthetic data.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// More log output; repeat for debug level.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the lens grid of a white image and write a calibration JSON.
    Calibrate(commands::calibrate::CalibrateArgs),
    /// Decode a raw capture into sub-aperture views.
    Decode(commands::decode::DecodeArgs),
    /// Refocus or tilt-focus a decoded view directory.
    Render(commands::render::RenderArgs),
    /// Score images against a reference as CSV.
    Metrics(commands::metrics::MetricsArgs),
    /// Generate synthetic white images and scenes with ground truth.
    #[command(subcommand)]
    Synth(commands::synth::SynthCommand),
}

fn run(cli: Cli) -> failure::Result<()> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref())?;
    config::overlay(&mut cfg.threads, cli.threads.map(Some));
    config::overlay(&mut cfg.seed, cli.seed.map(Some));
    if cli.linear {
        cfg.linear = true;
    }
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .io("configuring the thread pool")?;
    }
    match cli.command {
        Command::Calibrate(args) => commands::calibrate::run(&args, cfg),
        Command::Decode(args) => commands::decode::run(&args, cfg),
        Command::Render(args) => commands::render::run(&args, cfg),
        Command::Metrics(args) => commands::metrics::run(&args, cfg),
        Command::Synth(cmd) => commands::synth::run(&cmd, cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
