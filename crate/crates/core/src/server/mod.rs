//! TCP server hosting one scene.
//!
//! One accept loop spawns a thread per connection. Connection threads decode
//! frames and parse commands, then hand them to a single executor thread that
//! owns the scene, so commands from all clients run one at a time in arrival
//! order. Every executed command is appended to the command log.

mod handlers;
pub mod router;

pub use handlers::{catalog, handle, Handler, HandlerError, OutputStore};

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use thiserror::Error;

use crate::protocol::{
    decode_frame_limited, format_command, parse_command, write_frame, Command, FrameError, Response,
};
use crate::scene::Scene;

/// Largest request payload the server will read.
pub const MAX_REQUEST_BYTES: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("cannot prepare output directory {path}: {source}")]
    OutputDir { path: PathBuf, source: io::Error },
    #[error("cannot open command log {path}: {source}")]
    Log { path: PathBuf, source: io::Error },
    #[error("server executor has stopped")]
    Stopped,
}

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub host: String,
    /// 0 picks an ephemeral port.
    pub port: u16,
    pub output_dir: PathBuf,
    /// Optional file receiving one executed command per line.
    pub log_file: Option<PathBuf>,
}

impl ServerConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        ServerConfig {
            host: "127.0.0.1".into(),
            port: crate::protocol::DEFAULT_PORT,
            output_dir: output_dir.into(),
            log_file: None,
        }
    }
}

enum Job {
    Execute {
        command: Command,
        reply: Sender<Result<String, HandlerError>>,
    },
    Snapshot(Sender<Scene>),
    Log(Sender<Vec<String>>),
}

/// A running server. Dropping the handle stops accepting new connections.
pub struct ServerHandle {
    addr: SocketAddr,
    jobs: Sender<Job>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

/// Binds and starts serving in background threads.
pub fn start(scene: Scene, config: ServerConfig) -> Result<ServerHandle, ServerError> {
    let store = OutputStore::new(&config.output_dir).map_err(|source| ServerError::OutputDir {
        path: config.output_dir.clone(),
        source,
    })?;
    let log_sink = match &config.log_file {
        Some(path) => Some(BufWriter::new(File::create(path).map_err(|source| ServerError::Log {
            path: path.clone(),
            source,
        })?)),
        None => None,
    };
    let bind_addr = format!("{}:{}", config.host, config.port);
    let listener = TcpListener::bind(&bind_addr).map_err(|source| ServerError::Bind {
        addr: bind_addr.clone(),
        source,
    })?;
    let addr = listener.local_addr().map_err(|source| ServerError::Bind {
        addr: bind_addr,
        source,
    })?;

    let (jobs, inbox) = mpsc::channel();
    thread::Builder::new()
        .name("virtucv-exec".into())
        .spawn(move || execute_loop(scene, store, log_sink, inbox))
        .expect("spawn executor");

    let stop = Arc::new(AtomicBool::new(false));
    let accept = {
        let jobs = jobs.clone();
        let stop = stop.clone();
        thread::Builder::new()
            .name("virtucv-accept".into())
            .spawn(move || accept_loop(listener, jobs, stop))
            .expect("spawn accept loop")
    };

    Ok(ServerHandle {
        addr,
        jobs,
        stop,
        accept: Some(accept),
    })
}

/// Serves until the process is killed.
pub fn serve(scene: Scene, config: ServerConfig) -> Result<(), ServerError> {
    let handle = start(scene, config)?;
    handle.wait();
    Ok(())
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn port(&self) -> u16 {
        self.addr.port()
    }

    /// Copy of the scene as of every command submitted so far.
    pub fn scene_snapshot(&self) -> Result<Scene, ServerError> {
        let (tx, rx) = mpsc::channel();
        self.jobs.send(Job::Snapshot(tx)).map_err(|_| ServerError::Stopped)?;
        rx.recv().map_err(|_| ServerError::Stopped)
    }

    /// Executed commands in execution order, in canonical text form.
    pub fn command_log(&self) -> Result<Vec<String>, ServerError> {
        let (tx, rx) = mpsc::channel();
        self.jobs.send(Job::Log(tx)).map_err(|_| ServerError::Stopped)?;
        rx.recv().map_err(|_| ServerError::Stopped)
    }

    /// Blocks until the accept loop exits.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.accept.is_some() {
            self.stop_accepting();
        }
    }
}

fn execute_loop(
    mut scene: Scene,
    mut store: OutputStore,
    mut log_sink: Option<BufWriter<File>>,
    inbox: Receiver<Job>,
) {
    let mut log = Vec::new();
    for job in inbox {
        match job {
            Job::Execute { command, reply } => {
                let text = format_command(&command).unwrap_or_else(|_| command.uri());
                if let Some(sink) = log_sink.as_mut() {
                    let _ = writeln!(sink, "{text}").and_then(|_| sink.flush());
                }
                log.push(text);
                let _ = reply.send(handle(&command, &mut scene, &mut store));
            }
            Job::Snapshot(tx) => {
                let _ = tx.send(scene.clone());
            }
            Job::Log(tx) => {
                let _ = tx.send(log.clone());
            }
        }
    }
}

fn accept_loop(listener: TcpListener, jobs: Sender<Job>, stop: Arc<AtomicBool>) {
    for stream in listener.incoming() {
        if stop.load(Ordering::SeqCst) {
            break;
        }
        let Ok(stream) = stream else { continue };
        let jobs = jobs.clone();
        let _ = thread::Builder::new()
            .name("virtucv-conn".into())
            .spawn(move || serve_connection(stream, jobs));
    }
}

fn serve_connection(stream: TcpStream, jobs: Sender<Job>) {
    let _ = stream.set_nodelay(true);
    let Ok(mut reader) = stream.try_clone() else { return };
    let mut writer = stream;
    loop {
        let response = match decode_frame_limited(&mut reader, MAX_REQUEST_BYTES) {
            Ok(frame) => match parse_command(&frame.body) {
                Ok(command) => {
                    let (tx, rx) = mpsc::channel();
                    if jobs.send(Job::Execute { command, reply: tx }).is_err() {
                        break;
                    }
                    match rx.recv() {
                        Ok(Ok(body)) => Response::ok(frame.request_id, body),
                        Ok(Err(e)) => Response::error(frame.request_id, e),
                        Err(_) => break,
                    }
                }
                Err(e) => Response::error(frame.request_id, format_args!("parse error: {e}")),
            },
            Err(FrameError::Protocol {
                reason,
                request_id: Some(id),
            }) => Response::error(id, format_args!("protocol error: {reason}")),
            // Clean close, truncated frame, oversize or unreadable id: the
            // stream can no longer be resynchronized.
            Err(_) => break,
        };
        if write_frame(&mut writer, &response.into_frame()).is_err() {
            break;
        }
    }
    let _ = writer.shutdown(Shutdown::Both);
}
