//! Synthetic dataset generation over the wire.
//!
//! The run issues `vget /objects` once, then per sampled pose (and per color
//! variation) sets the camera location and rotation and captures image,
//! depth, object mask and normal. Captured files are moved out of the server's
//! output directory into the dataset directory under deterministic names, and
//! one JSON record per capture set is appended to `manifest.jsonl`.
//!
//! Setup commands issued around the loop: `vget /scene/bounds` right after the
//! objects query, and when color variations are requested, a
//! `vget /object/<name>/color` before the loop and a restoring `vset` after it.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::client::{ClientError, Connection, Modality};
use crate::math::Vec3;
use crate::scene::{Bounds, Rgb, Rotation};

pub const MANIFEST_FILE: &str = "manifest.jsonl";
/// Written next to the manifest when a run aborts.
pub const INCOMPLETE_MARKER: &str = "manifest.incomplete";

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{context}: {source}")]
    Command { context: String, source: ClientError },
    #[error("dataset I/O failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeightLevel {
    pub label: String,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub seed: u64,
    /// Poses per height level.
    pub count: usize,
    pub heights: Vec<HeightLevel>,
    pub pitch: f64,
    pub roll: f64,
    /// Object recolored for each variation.
    pub vary_object: String,
    pub colors: Vec<Rgb>,
    pub camera: u32,
    pub output_dir: PathBuf,
}

impl GenConfig {
    pub fn new(output_dir: impl Into<PathBuf>) -> Self {
        GenConfig {
            seed: 0,
            count: 1,
            heights: default_heights(),
            pitch: 0.0,
            roll: 0.0,
            vary_object: "sofa".into(),
            colors: Vec::new(),
            camera: 0,
            output_dir: output_dir.into(),
        }
    }
}

/// Eye level and robot-vacuum level, in cm.
pub fn default_heights() -> Vec<HeightLevel> {
    vec![
        HeightLevel { label: "eye".into(), z: 165.0 },
        HeightLevel { label: "roomba".into(), z: 9.0 },
    ]
}

/// Parses `label=z,label=z`.
pub fn parse_heights(text: &str) -> Result<Vec<HeightLevel>, GenError> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (label, z) = item
                .split_once('=')
                .ok_or_else(|| GenError::Config(format!("height {item:?} is not label=z")))?;
            let z: f64 = z
                .trim()
                .parse()
                .map_err(|_| GenError::Config(format!("height {item:?} has a bad z")))?;
            Ok(HeightLevel {
                label: label.trim().to_string(),
                z,
            })
        })
        .collect()
}

/// Parses `r,g,b`.
pub fn parse_rgb(text: &str) -> Result<Rgb, GenError> {
    let bad = || GenError::Config(format!("color {text:?} is not r,g,b in 0..=255"));
    let parts: Vec<u8> = text
        .split(',')
        .map(|t| t.trim().parse().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|_| bad())
}

/// Camera placement drawn for one capture set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledPose {
    pub location: Vec3,
    pub yaw: f64,
}

/// Draws x and y uniformly over the bounds' footprint and yaw uniformly in
/// [0, 360); z is the given height.
pub fn sample_pose<R: Rng>(bounds: &Bounds, rng: &mut R, height: f64) -> Result<SampledPose, GenError> {
    if !(bounds.min.x < bounds.max.x && bounds.min.y < bounds.max.y) {
        return Err(GenError::Config("free-space bounds have an empty footprint".into()));
    }
    let x = rng.random_range(bounds.min.x..bounds.max.x);
    let y = rng.random_range(bounds.min.y..bounds.max.y);
    let yaw = rng.random_range(0.0..360.0);
    Ok(SampledPose {
        location: Vec3::new(x, y, height),
        yaw,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: usize,
    pub height_label: String,
    /// `base`, or `<object>_<r>_<g>_<b>` for a color variation.
    pub variation: String,
    pub location: [f64; 3],
    pub rotation: [f64; 3],
    /// Paths relative to the manifest's directory.
    pub image: String,
    pub depth: String,
    pub object_mask: String,
    pub normal: String,
}

impl ManifestRecord {
    pub fn files(&self) -> [&str; 4] {
        [&self.image, &self.depth, &self.object_mask, &self.normal]
    }
}

#[derive(Debug)]
pub struct GenSummary {
    pub records: Vec<ManifestRecord>,
    pub manifest: PathBuf,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRecord>, GenError> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| GenError::Io(io::Error::new(io::ErrorKind::InvalidData, e))))
        .collect()
}

struct Run<'a> {
    conn: &'a mut Connection,
    config: &'a GenConfig,
    out: PathBuf,
    records: Vec<ManifestRecord>,
}

impl Run<'_> {
    fn cmd(&mut self, command: &str, context: &str) -> Result<String, GenError> {
        self.conn.request(command).map_err(|source| GenError::Command {
            context: format!("{context}: `{command}`"),
            source,
        })
    }

    fn capture(&mut self, modality: Modality, id: usize, context: &str) -> Result<String, GenError> {
        let src = self
            .conn
            .capture(self.config.camera, modality)
            .map_err(|source| GenError::Command {
                context: format!("{context}: capture {}", modality.segment()),
                source,
            })?;
        let name = format!("{id:06}_{}.{}", modality.segment(), modality.extension());
        move_file(&src, &self.out.join(&name))?;
        Ok(name)
    }

    fn pose_block(
        &mut self,
        pose: SampledPose,
        height: &HeightLevel,
        color: Option<Rgb>,
    ) -> Result<(), GenError> {
        let cfg = self.config;
        let id = self.records.len();
        let rotation = Rotation::new(pose.yaw, cfg.pitch, cfg.roll);
        let context = format!(
            "record {id} at location {:?} rotation {:?}",
            pose.location.to_array(),
            [rotation.yaw, rotation.pitch, rotation.roll]
        );
        let variation = match color {
            Some([r, g, b]) => {
                let obj = &cfg.vary_object;
                self.cmd(&format!("vset /object/{obj}/color {r} {g} {b}"), &context)?;
                format!("{obj}_{r}_{g}_{b}")
            }
            None => "base".to_string(),
        };
        let cam = cfg.camera;
        self.cmd(
            &format!("vset /camera/{cam}/location {}", crate::protocol::fmt_reals(&pose.location.to_array())),
            &context,
        )?;
        self.cmd(
            &format!(
                "vset /camera/{cam}/rotation {}",
                crate::protocol::fmt_reals(&[rotation.yaw, rotation.pitch, rotation.roll])
            ),
            &context,
        )?;
        let image = self.capture(Modality::Image, id, &context)?;
        let depth = self.capture(Modality::Depth, id, &context)?;
        let object_mask = self.capture(Modality::ObjectMask, id, &context)?;
        let normal = self.capture(Modality::Normal, id, &context)?;
        self.records.push(ManifestRecord {
            id,
            height_label: height.label.clone(),
            variation,
            location: pose.location.to_array(),
            rotation: [rotation.yaw, rotation.pitch, rotation.roll],
            image,
            depth,
            object_mask,
            normal,
        });
        Ok(())
    }

    fn execute(&mut self) -> Result<(), GenError> {
        let cfg = self.config;
        let objects = self.cmd("vget /objects", "objects query")?;
        let bounds_text = self.cmd("vget /scene/bounds", "bounds query")?;
        let bounds = parse_bounds(&bounds_text)?;
        for h in &cfg.heights {
            if h.z < bounds.min.z || h.z > bounds.max.z {
                return Err(GenError::Config(format!(
                    "height {} = {} lies outside the free-space bounds [{}, {}]",
                    h.label, h.z, bounds.min.z, bounds.max.z
                )));
            }
        }

        let variations: Vec<Option<Rgb>> = if cfg.colors.is_empty() {
            vec![None]
        } else {
            if !objects.split_ascii_whitespace().any(|n| n == cfg.vary_object) {
                return Err(GenError::Config(format!(
                    "object {:?} is not in the scene",
                    cfg.vary_object
                )));
            }
            cfg.colors.iter().copied().map(Some).collect()
        };
        let original_color = if cfg.colors.is_empty() {
            None
        } else {
            Some(self.cmd(&format!("vget /object/{}/color", cfg.vary_object), "color query")?)
        };

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for height in &cfg.heights {
            for _ in 0..cfg.count {
                let pose = sample_pose(&bounds, &mut rng, height.z)?;
                for color in &variations {
                    self.pose_block(pose, height, *color)?;
                }
            }
        }

        if let Some(original) = original_color {
            self.cmd(
                &format!("vset /object/{}/color {original}", cfg.vary_object),
                "color restore",
            )?;
        }
        Ok(())
    }
}

fn parse_bounds(text: &str) -> Result<Bounds, GenError> {
    let vals: Vec<f64> = text
        .split_ascii_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    match vals[..] {
        [a, b, c, d, e, f] => Ok(Bounds {
            min: Vec3::new(a, b, c),
            max: Vec3::new(d, e, f),
        }),
        _ => Err(GenError::Config(format!("server returned malformed bounds {text:?}"))),
    }
}

fn move_file(src: &Path, dst: &Path) -> io::Result<()> {
    if fs::rename(src, dst).is_err() {
        fs::copy(src, dst)?;
        fs::remove_file(src)?;
    }
    Ok(())
}

fn write_manifest(path: &Path, records: &[ManifestRecord]) -> io::Result<()> {
    let mut out = io::BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Runs the generation loop. On failure the records captured so far are
/// still written and [`INCOMPLETE_MARKER`] records the error.
pub fn generate(conn: &mut Connection, config: &GenConfig) -> Result<GenSummary, GenError> {
    if config.count == 0 {
        return Err(GenError::Config("count must be at least 1".into()));
    }
    if config.heights.is_empty() {
        return Err(GenError::Config("at least one height level is required".into()));
    }
    fs::create_dir_all(&config.output_dir)?;
    let out = fs::canonicalize(&config.output_dir)?;
    let manifest = out.join(MANIFEST_FILE);
    let marker = out.join(INCOMPLETE_MARKER);
    if marker.exists() {
        fs::remove_file(&marker)?;
    }

    let mut run = Run {
        conn,
        config,
        out,
        records: Vec::new(),
    };
    let result = run.execute();
    write_manifest(&manifest, &run.records)?;
    match result {
        Ok(()) => Ok(GenSummary {
            records: run.records,
            manifest,
        }),
        Err(e) => {
            fs::write(&marker, format!("{e}\n"))?;
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounds() -> Bounds {
        Bounds {
            min: Vec3::new(-300.0, -200.0, 5.0),
            max: Vec3::new(300.0, 250.0, 250.0),
        }
    }

    #[test]
    fn same_seed_same_poses() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_pose(&bounds(), &mut rng, 165.0).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(42), draw(42));
        assert_ne!(draw(42), draw(43));
    }

    #[test]
    fn samples_stay_in_bounds() {
        let b = bounds();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for i in 0..10_000 {
            let z = if i % 2 == 0 { 165.0 } else { 9.0 };
            let p = sample_pose(&b, &mut rng, z).unwrap();
            assert!(b.contains(p.location), "{p:?}");
            assert!((0.0..360.0).contains(&p.yaw));
            assert_eq!(p.location.z, z);
        }
    }

    #[test]
    fn degenerate_bounds() {
        let mut b = bounds();
        b.max.x = b.min.x;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_pose(&b, &mut rng, 10.0), Err(GenError::Config(_))));
    }

    #[test]
    fn height_and_color_parsing() {
        assert_eq!(parse_heights("eye=165,roomba=9").unwrap(), default_heights());
        assert!(parse_heights("eye").is_err());
        assert!(parse_heights("eye=high").is_err());
        assert_eq!(parse_rgb("200,30,30").unwrap(), [200, 30, 30]);
        assert!(parse_rgb("200,30").is_err());
        assert!(parse_rgb("300,0,0").is_err());
    }
}
