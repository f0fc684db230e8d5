//! Experiment harness: corpus generation, training, scoring, evaluation,
//! cross-corpus testing and handcrafted baselines.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::RunConfig;

/// Usage problems (bad flags, bad configuration) exit with this code.
pub const EXIT_USAGE: i32 = 1;
/// Data, model and I/O failures exit with this code.
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "pixbis", version, about = "Pixel-wise binary supervision for face presentation attack detection")]
pub struct Cli {
    /// File of key=value settings.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Extra KEY=VALUE setting; may be repeated.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic corpus and its manifest.
    Generate {
        #[arg(long)]
        name: Option<String>,
        /// Strength applied to all four artifacts.
        #[arg(long)]
        strength: Option<f64>,
    },
    /// Train the network on a protocol's train split.
    Train {
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        protocol: Option<String>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long, value_name = "CKPT")]
        resume: Option<PathBuf>,
    },
    /// Write frame- and video-level scores for one split.
    Score {
        #[arg(long, value_name = "CKPT")]
        model: PathBuf,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long, default_value = "eval")]
        split: String,
        /// Frames scored per video.
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        protocol: Option<String>,
    },
    /// Threshold on dev scores, report on eval scores.
    Evaluate {
        #[arg(long, value_name = "CSV")]
        dev: PathBuf,
        #[arg(long, value_name = "CSV")]
        eval: PathBuf,
        /// Method name recorded in the report header.
        #[arg(long, default_value = "pixbis")]
        method: String,
    },
    /// Apply a model trained on one corpus to another.
    Cross {
        #[arg(long, value_name = "CKPT")]
        model: PathBuf,
        #[arg(long, value_name = "DIR")]
        source: PathBuf,
        #[arg(long, value_name = "DIR")]
        target: PathBuf,
        /// Dev split used for the threshold: source or target.
        #[arg(long)]
        threshold_from: Option<String>,
    },
    /// Handcrafted-feature baseline (lbp or iqm) with logistic regression.
    Baseline {
        #[arg(long)]
        kind: String,
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        #[arg(long)]
        protocol: Option<String>,
    },
}

/// Marks an error as a usage problem.
#[derive(Debug)]
pub struct UsageError(pub anyhow::Error);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for UsageError {}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}
