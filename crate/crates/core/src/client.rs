//! Synchronous client: one request in flight per connection.

use std::net::{TcpStream, ToSocketAddrs};
use std::path::PathBuf;
use std::time::Duration;

use thiserror::Error;

use crate::math::Vec3;
use crate::protocol::{self, decode_frame, fmt_reals, write_frame, Frame, FrameError, Response, Status};
use crate::scene::{Bounds, Rgb, Rotation};

pub const DEFAULT_CONNECT_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("cannot connect to {addr}: {source}")]
    Connect { addr: String, source: std::io::Error },
    #[error("transport error: {0}")]
    Transport(#[from] FrameError),
    #[error("protocol error: {0}")]
    Protocol(String),
    /// ERROR response; carries the message without the `error ` prefix.
    #[error("server error: {0}")]
    Server(String),
}

impl ClientError {
    pub fn server_message(&self) -> Option<&str> {
        match self {
            ClientError::Server(m) => Some(m),
            _ => None,
        }
    }
}

/// Image-producing capture commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Image,
    Depth,
    ObjectMask,
    Normal,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::Image, Modality::Depth, Modality::ObjectMask, Modality::Normal];

    /// Final URI segment of the capture command.
    pub fn segment(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Depth => "depth",
            Modality::ObjectMask => "object_mask",
            Modality::Normal => "normal",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Modality::Depth => "pfm",
            _ => "png",
        }
    }
}

pub struct Connection {
    stream: TcpStream,
    next_id: u64,
    peer: String,
}

/// Connects with the default 5 s timeout.
pub fn connect(host: &str, port: u16) -> Result<Connection, ClientError> {
    connect_timeout(host, port, DEFAULT_CONNECT_TIMEOUT)
}

pub fn connect_timeout(host: &str, port: u16, timeout: Duration) -> Result<Connection, ClientError> {
    let peer = format!("{host}:{port}");
    let connect_err = |source| ClientError::Connect {
        addr: peer.clone(),
        source,
    };
    let mut last_err = std::io::Error::new(std::io::ErrorKind::NotFound, "no addresses resolved");
    for addr in (host, port).to_socket_addrs().map_err(connect_err)? {
        match TcpStream::connect_timeout(&addr, timeout) {
            Ok(stream) => {
                let _ = stream.set_nodelay(true);
                return Ok(Connection {
                    stream,
                    next_id: 0,
                    peer,
                });
            }
            Err(e) => last_err = e,
        }
    }
    Err(connect_err(last_err))
}

fn parse_reals<const N: usize>(body: &str) -> Result<[f64; N], ClientError> {
    let bad = || ClientError::Protocol(format!("expected {N} numbers, got {body:?}"));
    let vals: Vec<f64> = body
        .split_ascii_whitespace()
        .map(|t| t.parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    vals.try_into().map_err(|_| bad())
}

impl Connection {
    pub fn peer(&self) -> &str {
        &self.peer
    }

    /// Id the next request will carry.
    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    /// Sends one command and waits for its response, ERROR included.
    pub fn request_raw(&mut self, command: &str) -> Result<Response, ClientError> {
        let id = self.next_id;
        self.next_id += 1;
        write_frame(&mut self.stream, &Frame::new(id, command))?;
        let frame = decode_frame(&mut self.stream)?;
        if frame.request_id != id {
            return Err(ClientError::Protocol(format!(
                "response id {} does not match request id {id}",
                frame.request_id
            )));
        }
        Ok(Response::from_frame(frame))
    }

    /// Sends one command; ERROR responses become [`ClientError::Server`].
    pub fn request(&mut self, command: &str) -> Result<String, ClientError> {
        let resp = self.request_raw(command)?;
        match resp.status {
            Status::Ok => Ok(resp.body),
            Status::Error => Err(ClientError::Server(
                resp.error_message().unwrap_or_default().to_string(),
            )),
        }
    }

    pub fn list_objects(&mut self) -> Result<Vec<String>, ClientError> {
        let body = self.request("vget /objects")?;
        Ok(body.split_ascii_whitespace().map(String::from).collect())
    }

    pub fn get_camera_location(&mut self, camera: u32) -> Result<Vec3, ClientError> {
        let body = self.request(&format!("vget /camera/{camera}/location"))?;
        parse_reals::<3>(&body).map(Vec3::from)
    }

    pub fn set_camera_location(&mut self, camera: u32, location: Vec3) -> Result<(), ClientError> {
        self.request(&format!(
            "vset /camera/{camera}/location {}",
            fmt_reals(&location.to_array())
        ))
        .map(drop)
    }

    pub fn get_camera_rotation(&mut self, camera: u32) -> Result<Rotation, ClientError> {
        let body = self.request(&format!("vget /camera/{camera}/rotation"))?;
        parse_reals::<3>(&body).map(Rotation::from)
    }

    pub fn set_camera_rotation(&mut self, camera: u32, rotation: Rotation) -> Result<(), ClientError> {
        self.request(&format!(
            "vset /camera/{camera}/rotation {}",
            fmt_reals(&[rotation.yaw, rotation.pitch, rotation.roll])
        ))
        .map(drop)
    }

    /// Captures one modality and returns the server-side file path, which
    /// must also be visible locally.
    pub fn capture(&mut self, camera: u32, modality: Modality) -> Result<PathBuf, ClientError> {
        let body = self.request(&format!("vget /camera/{camera}/{}", modality.segment()))?;
        let path = PathBuf::from(body);
        if !path.is_file() {
            return Err(ClientError::Protocol(format!(
                "server reported {} but it does not exist on this host",
                path.display()
            )));
        }
        Ok(path)
    }

    pub fn get_object_color(&mut self, name: &str) -> Result<Rgb, ClientError> {
        let body = self.request(&format!("vget /object/{name}/color"))?;
        let bad = || ClientError::Protocol(format!("bad color {body:?}"));
        let parts: Vec<u8> = body
            .split_ascii_whitespace()
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        parts.try_into().map_err(|_| bad())
    }

    pub fn set_object_color(&mut self, name: &str, color: Rgb) -> Result<(), ClientError> {
        let [r, g, b] = color;
        self.request(&format!("vset /object/{name}/color {r} {g} {b}")).map(drop)
    }

    pub fn get_object_location(&mut self, name: &str) -> Result<Vec3, ClientError> {
        let body = self.request(&format!("vget /object/{name}/location"))?;
        parse_reals::<3>(&body).map(Vec3::from)
    }

    pub fn set_light_intensity(&mut self, name: &str, intensity: f64) -> Result<(), ClientError> {
        self.request(&format!(
            "vset /light/{name}/intensity {}",
            protocol::fmt_real(intensity)
        ))
        .map(drop)
    }

    pub fn get_light_intensity(&mut self, name: &str) -> Result<f64, ClientError> {
        let body = self.request(&format!("vget /light/{name}/intensity"))?;
        parse_reals::<1>(&body).map(|[v]| v)
    }

    pub fn scene_bounds(&mut self) -> Result<Bounds, ClientError> {
        let body = self.request("vget /scene/bounds")?;
        let [a, b, c, d, e, f] = parse_reals::<6>(&body)?;
        Ok(Bounds {
            min: Vec3::new(a, b, c),
            max: Vec3::new(d, e, f),
        })
    }
}
