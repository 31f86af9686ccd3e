//! In-memory world state and the JSON scene-file loader.
//!
//! Coordinates are Z-up, in centimeters. Rotations are yaw/pitch/roll in
//! degrees; see [`camera_basis`] for the exact convention.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;

pub type Rgb = [u8; 3];

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("cannot read scene file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed scene document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("duplicate {kind} name {name:?}")]
    DuplicateName { kind: &'static str, name: String },
    #[error("object {name:?} has invalid geometry: {reason}")]
    InvalidGeometry { name: String, reason: String },
    #[error("light {name:?} is invalid: {reason}")]
    InvalidLight { name: String, reason: String },
    #[error("camera is invalid: {0}")]
    InvalidCamera(String),
    #[error("free-space bounds are invalid: {0}")]
    InvalidBounds(String),
    #[error("{kind} {name:?} not found")]
    NotFound { kind: &'static str, name: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Rotation {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl Rotation {
    pub const fn new(yaw: f64, pitch: f64, roll: f64) -> Self {
        Rotation { yaw, pitch, roll }
    }

    /// Equality with each angle compared modulo 360 degrees.
    pub fn approx_eq_mod_360(&self, other: &Rotation, tol: f64) -> bool {
        let close = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(360.0);
            d.min(360.0 - d) <= tol
        };
        close(self.yaw, other.yaw) && close(self.pitch, other.pitch) && close(self.roll, other.roll)
    }
}

impl From<[f64; 3]> for Rotation {
    fn from(a: [f64; 3]) -> Self {
        Rotation::new(a[0], a[1], a[2])
    }
}

impl From<Rotation> for [f64; 3] {
    fn from(r: Rotation) -> Self {
        [r.yaw, r.pitch, r.roll]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub location: Vec3,
    pub rotation: Rotation,
    #[serde(rename = "fov", default = "default_fov")]
    pub horizontal_fov: f64,
    #[serde(rename = "width", default = "default_width")]
    pub image_width: u32,
    #[serde(rename = "height", default = "default_height")]
    pub image_height: u32,
}

fn default_fov() -> f64 {
    90.0
}
fn default_width() -> u32 {
    640
}
fn default_height() -> u32 {
    480
}

impl Default for CameraPose {
    fn default() -> Self {
        CameraPose {
            location: Vec3::ZERO,
            rotation: Rotation::default(),
            horizontal_fov: default_fov(),
            image_width: default_width(),
            image_height: default_height(),
        }
    }
}

impl CameraPose {
    fn validate(&self) -> Result<(), SceneError> {
        if !self.location.is_finite() {
            return Err(SceneError::InvalidCamera("location is not finite".into()));
        }
        let r = self.rotation;
        if !(r.yaw.is_finite() && r.pitch.is_finite() && r.roll.is_finite()) {
            return Err(SceneError::InvalidCamera("rotation is not finite".into()));
        }
        if !(self.horizontal_fov > 0.0 && self.horizontal_fov < 180.0) {
            return Err(SceneError::InvalidCamera(format!(
                "fov {} outside (0, 180)",
                self.horizontal_fov
            )));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return Err(SceneError::InvalidCamera("image size must be at least 1x1".into()));
        }
        Ok(())
    }
}

/// Orthonormal camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Basis {
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

/// Camera frame for a rotation.
///
/// At zero rotation forward is +X, right is +Y and up is +Z. Yaw turns about
/// +Z (positive yaw swings forward toward +Y), pitch tilts about the yawed
/// right axis (positive pitch raises forward), and roll turns right toward up
/// about the resulting forward axis.
pub fn camera_basis(rotation: &Rotation) -> Basis {
    let (sy, cy) = rotation.yaw.to_radians().sin_cos();
    let (sp, cp) = rotation.pitch.to_radians().sin_cos();
    let (sr, cr) = rotation.roll.to_radians().sin_cos();

    let forward = Vec3::new(cp * cy, cp * sy, sp);
    let right0 = Vec3::new(-sy, cy, 0.0);
    let up0 = Vec3::new(-sp * cy, -sp * sy, cp);

    Basis {
        forward,
        right: right0 * cr + up0 * sr,
        up: up0 * cr - right0 * sr,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Geometry {
    Sphere { center: Vec3, radius: f64 },
    Box { min: Vec3, max: Vec3 },
    Mesh(Mesh),
}

impl Geometry {
    fn validate(&self) -> Result<(), String> {
        match self {
            Geometry::Sphere { center, radius } => {
                if !center.is_finite() || !radius.is_finite() {
                    return Err("non-finite sphere parameters".into());
                }
                if *radius <= 0.0 {
                    return Err(format!("sphere radius {radius} is not positive"));
                }
            }
            Geometry::Box { min, max } => {
                if !min.is_finite() || !max.is_finite() {
                    return Err("non-finite box corners".into());
                }
                if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                    return Err("box min must be below max on every axis".into());
                }
            }
            Geometry::Mesh(mesh) => {
                if mesh.triangles.is_empty() {
                    return Err("mesh has no triangles".into());
                }
                if mesh.vertices.iter().any(|v| !v.is_finite()) {
                    return Err("mesh has non-finite vertices".into());
                }
                let n = mesh.vertices.len();
                for (i, tri) in mesh.triangles.iter().enumerate() {
                    if tri.iter().any(|&v| v as usize >= n) {
                        return Err(format!("triangle {i} references a missing vertex"));
                    }
                    let [a, b, c] = tri.map(|v| mesh.vertices[v as usize]);
                    if (b - a).cross(c - a).length() == 0.0 {
                        return Err(format!("triangle {i} is degenerate"));
                    }
                }
            }
        }
        Ok(())
    }

    /// Axis-aligned bounds as (min, max).
    pub fn bounds(&self) -> (Vec3, Vec3) {
        match self {
            Geometry::Sphere { center, radius } => {
                let r = Vec3::new(*radius, *radius, *radius);
                (*center - r, *center + r)
            }
            Geometry::Box { min, max } => (*min, *max),
            Geometry::Mesh(mesh) => {
                let first = mesh.vertices[mesh.triangles[0][0] as usize];
                mesh.triangles
                    .iter()
                    .flatten()
                    .map(|&i| mesh.vertices[i as usize])
                    .fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)))
            }
        }
    }

    /// Centroid of the bounds; used as the object's location.
    pub fn center(&self) -> Vec3 {
        let (lo, hi) = self.bounds();
        (lo + hi) * 0.5
    }

    pub fn translate(&mut self, d: Vec3) {
        match self {
            Geometry::Sphere { center, .. } => *center += d,
            Geometry::Box { min, max } => {
                *min += d;
                *max += d;
            }
            Geometry::Mesh(mesh) => mesh.vertices.iter_mut().for_each(|v| *v += d),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneObject {
    pub name: String,
    pub geometry: Geometry,
    pub base_color: Rgb,
    pub instance_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LightKind {
    /// `direction` is the direction the light travels.
    Directional { direction: Vec3 },
    Point { position: Vec3 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Light {
    pub name: String,
    pub kind: LightKind,
    pub intensity: f64,
    /// Linear color, each component in [0, 1].
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bounds {
    pub fn contains(&self, p: Vec3) -> bool {
        (0..3).all(|i| p.axis(i) >= self.min.axis(i) && p.axis(i) <= self.max.axis(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scene {
    /// Ordered by instance index.
    objects: Vec<SceneObject>,
    #[serde(skip)]
    by_name: HashMap<String, usize>,
    pub lights: BTreeMap<String, Light>,
    pub cameras: BTreeMap<u32, CameraPose>,
    pub free_space_bounds: Bounds,
}

// Raw document shapes; validated into `Scene`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default)]
    objects: Vec<ObjectEntry>,
    #[serde(default)]
    lights: Vec<LightEntry>,
    #[serde(default)]
    camera: CameraPose,
    free_space_bounds: Bounds,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectEntry {
    name: String,
    geometry: Geometry,
    color: Rgb,
}

#[derive(Deserialize)]
struct LightEntry {
    name: String,
    #[serde(flatten)]
    kind: LightKind,
    intensity: f64,
    #[serde(default = "white")]
    color: [f64; 3],
}

fn white() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

/// Loads and validates a scene file. Instance indices follow file order.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scene::from_json(&text)
}

impl Scene {
    pub fn from_json(text: &str) -> Result<Scene, SceneError> {
        let file: SceneFile = serde_json::from_str(text)?;

        let mut scene = Scene::empty(file.free_space_bounds)?;
        file.camera.validate()?;
        scene.cameras.insert(0, file.camera);

        for entry in file.objects {
            scene.add_object(entry.name, entry.geometry, entry.color)?;
        }
        for entry in file.lights {
            scene.add_light(Light {
                name: entry.name,
                kind: entry.kind,
                intensity: entry.intensity,
                color: entry.color,
            })?;
        }
        Ok(scene)
    }

    /// A scene with only the default camera 0.
    pub fn empty(free_space_bounds: Bounds) -> Result<Scene, SceneError> {
        let b = free_space_bounds;
        if !b.min.is_finite() || !b.max.is_finite() || (0..3).any(|i| b.min.axis(i) > b.max.axis(i)) {
            return Err(SceneError::InvalidBounds("min must not exceed max".into()));
        }
        Ok(Scene {
            objects: Vec::new(),
            by_name: HashMap::new(),
            lights: BTreeMap::new(),
            cameras: BTreeMap::from([(0, CameraPose::default())]),
            free_space_bounds,
        })
    }

    pub fn add_object(
        &mut self,
        name: impl Into<String>,
        geometry: Geometry,
        color: Rgb,
    ) -> Result<u32, SceneError> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(SceneError::DuplicateName { kind: "object", name });
        }
        geometry
            .validate()
            .map_err(|reason| SceneError::InvalidGeometry { name: name.clone(), reason })?;
        let index = self.objects.len() as u32;
        self.by_name.insert(name.clone(), self.objects.len());
        self.objects.push(SceneObject {
            name,
            geometry,
            base_color: color,
            instance_index: index,
        });
        Ok(index)
    }

    pub fn add_light(&mut self, light: Light) -> Result<(), SceneError> {
        let invalid = |reason: &str| SceneError::InvalidLight {
            name: light.name.clone(),
            reason: reason.into(),
        };
        if self.lights.contains_key(&light.name) {
            return Err(SceneError::DuplicateName {
                kind: "light",
                name: light.name,
            });
        }
        if !(light.intensity >= 0.0 && light.intensity.is_finite()) {
            return Err(invalid("intensity must be finite and non-negative"));
        }
        if light.color.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(invalid("color components must lie in [0, 1]"));
        }
        match light.kind {
            LightKind::Directional { direction } => {
                if !direction.is_finite() || direction.length() == 0.0 {
                    return Err(invalid("direction must be finite and non-zero"));
                }
            }
            LightKind::Point { position } => {
                if !position.is_finite() {
                    return Err(invalid("position must be finite"));
                }
            }
        }
        self.lights.insert(light.name.clone(), light);
        Ok(())
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn object(&self, name: &str) -> Option<&SceneObject> {
        self.by_name.get(name).map(|&i| &self.objects[i])
    }

    fn object_mut(&mut self, name: &str) -> Result<&mut SceneObject, SceneError> {
        match self.by_name.get(name) {
            Some(&i) => Ok(&mut self.objects[i]),
            None => Err(SceneError::NotFound {
                kind: "object",
                name: name.to_string(),
            }),
        }
    }

    pub fn camera(&self, index: u32) -> Option<&CameraPose> {
        self.cameras.get(&index)
    }

    pub fn camera_mut(&mut self, index: u32) -> Option<&mut CameraPose> {
        self.cameras.get_mut(&index)
    }

    pub fn light_mut(&mut self, name: &str) -> Result<&mut Light, SceneError> {
        self.lights.get_mut(name).ok_or_else(|| SceneError::NotFound {
            kind: "light",
            name: name.to_string(),
        })
    }

    /// Replaces an object's base color; geometry is untouched.
    pub fn set_object_color(&mut self, name: &str, color: Rgb) -> Result<(), SceneError> {
        self.object_mut(name)?.base_color = color;
        Ok(())
    }

    /// Translates an object so that the centroid of its bounds lands on
    /// `location`.
    pub fn set_object_location(&mut self, name: &str, location: Vec3) -> Result<(), SceneError> {
        let obj = self.object_mut(name)?;
        let delta = location - obj.geometry.center();
        obj.geometry.translate(delta);
        Ok(())
    }

    /// Canonical serialized form, used to compare world states.
    pub fn state_digest(&self) -> String {
        serde_json::to_string(self).expect("scene serializes")
    }
}
