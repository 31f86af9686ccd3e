//! A scriptable virtual world for computer-vision experiments.
//!
//! A [`server`] hosts a [`scene`] and answers plain-text `vget`/`vset`
//! commands framed by [`protocol`]. Image-producing commands ray-cast the
//! scene with [`render`] and write the lit image, instance mask and normal
//! map as PNG and planar depth as PFM. The [`client`] library drives a server;
//! [`dataset`] and [`diagnose`] build the dataset-generation and
//! detector-diagnosis tools on top of it.

pub mod client;
pub mod dataset;
pub mod diagnose;
pub mod image_io;
pub mod math;
pub mod protocol;
pub mod render;
pub mod scene;
pub mod server;

pub use math::Vec3;

/// Port from `VIRTUCV_PORT`, falling back to the protocol default.
pub fn port_from_env() -> u16 {
    std::env::var("VIRTUCV_PORT")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(protocol::DEFAULT_PORT)
}
