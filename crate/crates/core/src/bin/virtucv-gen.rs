use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use virtucv::client;
use virtucv::dataset::{self, GenConfig};

/// Samples camera poses and captures image, depth, mask and normal for each.
#[derive(Parser)]
#[command(name = "virtucv-gen", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Defaults to VIRTUCV_PORT or 9000.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Poses per height level.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Height levels as label=z_cm pairs.
    #[arg(long, default_value = "eye=165,roomba=9")]
    heights: String,
    /// Colors for the varied object, `r,g,b`; repeat the flag or separate with `;`.
    #[arg(long = "sofa-colors", value_delimiter = ';')]
    sofa_colors: Vec<String>,
    /// Object recolored by --sofa-colors.
    #[arg(long, default_value = "sofa")]
    vary_object: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pitch: f64,
    #[arg(long)]
    out: PathBuf,
}

fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let mut config = GenConfig::new(args.out);
    config.seed = args.seed;
    config.count = args.count;
    config.heights = dataset::parse_heights(&args.heights)?;
    config.colors = args
        .sofa_colors
        .iter()
        .map(|c| dataset::parse_rgb(c))
        .collect::<Result<_, _>>()?;
    config.vary_object = args.vary_object;
    config.pitch = args.pitch;

    let port = args.port.unwrap_or_else(virtucv::port_from_env);
    let mut conn = client::connect(&args.host, port)?;
    let summary = dataset::generate(&mut conn, &config)?;
    println!("{} records -> {}", summary.records.len(), summary.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("virtucv-gen: {e}");
            ExitCode::FAILURE
        }
    }
}
