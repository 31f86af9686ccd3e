use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use virtucv::scene::load_scene;
use virtucv::server::{self, ServerConfig};

/// Hosts a scene and answers vget/vset commands over TCP.
#[derive(Parser)]
#[command(name = "virtucv-server", version)]
struct Args {
    /// Scene file (JSON).
    #[arg(long)]
    scene: PathBuf,
    /// Listening port; defaults to VIRTUCV_PORT or 9000.
    #[arg(long)]
    port: Option<u16>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Directory for captured images.
    #[arg(long, default_value = "virtucv_out")]
    out: PathBuf,
    /// Append every executed command to this file.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let scene = match load_scene(&args.scene) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("virtucv-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    let config = ServerConfig {
        host: args.host,
        port: args.port.unwrap_or_else(virtucv::port_from_env),
        output_dir: args.out,
        log_file: args.log,
    };
    let handle = match server::start(scene, config) {
        Ok(h) => h,
        Err(e) => {
            eprintln!("virtucv-server: {e}");
            return ExitCode::FAILURE;
        }
    };
    eprintln!("virtucv-server: listening on {}", handle.addr());
    handle.wait();
    ExitCode::SUCCESS
}
