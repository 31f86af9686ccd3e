use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use virtucv::client;
use virtucv::diagnose::{self, ExternalDetector, ViewGrid};

/// Sweeps the camera around a target and reports detector AP per viewpoint.
#[derive(Parser)]
#[command(name = "virtucv-diagnose", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Defaults to VIRTUCV_PORT or 9000.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "sofa")]
    target: String,
    /// Detector command line; the image path is appended as the last argument.
    #[arg(long)]
    detector: String,
    #[arg(long, default_value = "90,135,180,225,270", allow_hyphen_values = true)]
    azimuths: String,
    #[arg(long, default_value = "0,30,60", allow_hyphen_values = true)]
    elevations: String,
    /// `start:end:step` (inclusive) or a comma list, in cm.
    #[arg(long, default_value = "200:290:10")]
    distances: String,
    /// Minimum ground-truth box area as a fraction of image pixels.
    #[arg(long, default_value_t = diagnose::DEFAULT_VISIBILITY_THRESHOLD)]
    vis_threshold: f64,
    /// Text report; a JSON companion is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let mut grid = ViewGrid::new(args.target);
    grid.azimuths = diagnose::parse_range(&args.azimuths)?;
    grid.elevations = diagnose::parse_range(&args.elevations)?;
    grid.distances = diagnose::parse_range(&args.distances)?;
    let mut detector = ExternalDetector::from_command_line(&args.detector)?;

    let port = args.port.unwrap_or_else(virtucv::port_from_env);
    let mut conn = client::connect(&args.host, port)?;
    let report = diagnose::run_diagnosis(&mut conn, &grid, &mut detector, args.vis_threshold)?;
    let table = report.to_table();
    print!("{table}");
    if let Some(out) = args.out {
        std::fs::write(&out, &table)?;
        std::fs::write(out.with_extension("json"), report.to_json())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("virtucv-diagnose: {e}");
            ExitCode::FAILURE
        }
    }
}
