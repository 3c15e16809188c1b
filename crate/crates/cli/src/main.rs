//! `codedcam` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "codedcam", version, about = "Coded-aperture depth and RGB-D odometry toolkit")]
struct Cli {
    /// key=value config file or a previous run's manifest.json. Falls back to
    /// $CODEDCAM_CONFIG. Any key can also be set with --section.key=value.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the PSF bank and export it with the mask and bins.
    Psf {
        #[arg(long)]
        out: PathBuf,
    },
    /// Render coded frames for every frame of a dataset.
    Render {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate depth maps from coded frames.
    Depth {
        /// Output folder of `render`.
        #[arg(long)]
        coded: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Dataset with ground-truth depth for the metrics report.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Track coded frames with estimated depth; writes a TUM trajectory.
    Vo {
        #[arg(long)]
        coded: PathBuf,
        /// Output folder of `depth`.
        #[arg(long)]
        depth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Absolute trajectory error between two TUM files.
    Ate {
        #[arg(long)]
        est: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Association tolerance, seconds (default from eval.max_dt).
        #[arg(long)]
        max_dt: Option<f64>,
        /// Also fit a global scale (comparison mode).
        #[arg(long)]
        with_scale: bool,
        /// Per-pose aligned positions as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Folder for the JSON report and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// render, depth, vo and ate in one run.
    Pipeline {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep mask size or focus distance over a dataset.
    Ablate {
        #[arg(long)]
        dataset: PathBuf,
        /// mask_size or focus_distance.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic two-plane RGB-D sequence in TUM layout.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        frames: usize,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        /// Near plane depth, snapped to the nearest bin center.
        #[arg(long, default_value_t = 1.3)]
        near: f64,
        /// Far plane depth, snapped to the nearest bin center.
        #[arg(long, default_value_t = 2.5)]
        far: f64,
        #[arg(long, default_value_t = 5)]
        scene_seed: u64,
    },
}

/// Splits `--section.key=value` (and `--seed=value`) overrides from the
/// arguments clap sees.
fn split_overrides(args: Vec<String>) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    for a in args {
        if let Some((k, v)) = a.strip_prefix("--").and_then(|s| s.split_once('=')) {
            if k.contains('.') || k == "seed" {
                overrides.push((k.to_string(), v.to_string()));
                continue;
            }
        }
        rest.push(a);
    }
    (rest, overrides)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    let validation = err.chain().any(|e| {
        e.downcast_ref::<codedcam::Error>().is_some_and(|e| e.is_validation())
            || e.downcast_ref::<commands::UsageError>().is_some()
    });
    if validation {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let (args, overrides) = split_overrides(std::env::args().collect());
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli, &args[1..], &overrides) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
