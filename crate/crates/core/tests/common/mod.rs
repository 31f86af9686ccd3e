#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tempfile::TempDir;
use virtucv::client::{self, Connection};
use virtucv::scene::{load_scene, Scene};
use virtucv::server::{self, ServerConfig, ServerHandle};

pub fn room_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/room.scene.json")
}

pub fn room() -> Scene {
    load_scene(room_path()).expect("bundled room scene loads")
}

pub struct Running {
    pub server: ServerHandle,
    pub dir: TempDir,
}

impl Running {
    pub fn connect(&self) -> Connection {
        client::connect("127.0.0.1", self.server.port()).expect("connect to test server")
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

/// Starts a server on an ephemeral port with captures under a fresh temp dir.
pub fn start(scene: Scene) -> Running {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut config = ServerConfig::new(dir.path().join("captures"));
    config.port = 0;
    let server = server::start(scene, config).expect("server starts");
    Running { server, dir }
}
