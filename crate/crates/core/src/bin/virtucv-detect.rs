//! Reference detectors for the diagnosis harness. Both read the ground-truth
//! mask named by `VIRTUCV_GT_MASK` and the target color in `VIRTUCV_GT_COLOR`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use virtucv::diagnose::detectors::{
    format_detection, jitter_detections, oracle_detections, Jitter, ENV_GT_COLOR, ENV_GT_MASK,
};
use virtucv::image_io;

#[derive(Parser)]
#[command(name = "virtucv-detect", version)]
struct Args {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    /// Emit the exact ground-truth box.
    Oracle { image: PathBuf },
    /// Emit the ground-truth box shifted and scaled.
    Jitter {
        /// Horizontal shift as a fraction of box width.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        dx: f64,
        /// Vertical shift as a fraction of box height.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        dy: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        image: PathBuf,
    },
}

fn target_color() -> Result<[u8; 3], String> {
    let text = std::env::var(ENV_GT_COLOR).map_err(|_| format!("{ENV_GT_COLOR} is not set"))?;
    let parts: Vec<u8> = text
        .split_ascii_whitespace()
        .map(|t| t.parse().map_err(|_| format!("bad {ENV_GT_COLOR} {text:?}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| format!("bad {ENV_GT_COLOR} {text:?}"))
}

fn run(args: Args) -> Result<(), String> {
    let mask_path = std::env::var(ENV_GT_MASK).map_err(|_| format!("{ENV_GT_MASK} is not set"))?;
    let mask = image_io::read_png(&mask_path).map_err(|e| format!("{mask_path}: {e}"))?;
    let color = target_color()?;
    let detections = match args.mode {
        Mode::Oracle { .. } => oracle_detections(&mask, color),
        Mode::Jitter { dx, dy, scale, .. } => jitter_detections(&mask, color, &Jitter { dx, dy, scale }),
    };
    for d in &detections {
        println!("{}", format_detection(d));
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("virtucv-detect: {e}");
            ExitCode::FAILURE
        }
    }
}
