//! Deterministic per-pixel ray caster producing the lit image, planar depth,
//! encoded world normals and the instance mask of a camera view.
//!
//! Depth is *planar*: the distance from the camera to the hit point measured
//! along the camera's forward axis, not the ray length. A fronto-parallel wall
//! therefore has constant depth. Pixels that hit nothing get `+inf`.

mod ray;

pub use ray::{intersect, intersect_geometry, primary_ray, Hit, Ray, T_EPSILON};

use thiserror::Error;

use crate::math::Vec3;
use crate::scene::{camera_basis, Basis, CameraPose, Geometry, LightKind, Rgb, Scene};

/// Ambient term as a fraction of base color.
pub const AMBIENT: f64 = 0.1;

/// Encoding of the zero normal, used for background pixels.
pub const BACKGROUND_NORMAL: Rgb = [128, 128, 128];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RenderError {
    #[error("camera {0} not found")]
    CameraNotFound(u32),
}

/// Interleaved 8-bit RGB pixels, row-major from the top row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = Rgb> + '_ {
        self.data.chunks_exact(3).map(|c| [c[0], c[1], c[2]])
    }
}

/// Row-major float image from the top row.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

impl DepthImage {
    pub fn at(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOutput {
    pub lit: RgbImage,
    pub depth: DepthImage,
    pub normal: RgbImage,
    pub mask: RgbImage,
}

/// Where per-pixel work runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon pool; same as `Sequential` when the `parallel` feature is off.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Color of instance `index` in the mask: `index + 1` written base-256 into
/// R, G, B (least significant first). Never black.
///
/// Panics if `index >= 2^24 - 1`.
pub fn instance_color(index: u32) -> Rgb {
    assert!(index < (1 << 24) - 1, "instance index {index} does not fit a mask color");
    let v = index + 1;
    [(v % 256) as u8, ((v / 256) % 256) as u8, (v / 65536) as u8]
}

/// Inverse of [`instance_color`]; `None` for black.
pub fn instance_from_color(c: Rgb) -> Option<u32> {
    let v = c[0] as u32 + 256 * c[1] as u32 + 65536 * c[2] as u32;
    v.checked_sub(1)
}

fn round_half_up(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// `round(255 * (n * 0.5 + 0.5))` per component, halves rounded up.
pub fn encode_normal(n: Vec3) -> Rgb {
    n.to_array().map(|c| round_half_up(255.0 * (c * 0.5 + 0.5)))
}

pub fn decode_normal(c: Rgb) -> Vec3 {
    Vec3::from(c.map(|v| v as f64 / 255.0 * 2.0 - 1.0))
}

struct Pixel {
    lit: Rgb,
    depth: f32,
    normal: Rgb,
    mask: Rgb,
}

const BACKGROUND: Pixel = Pixel {
    lit: [0, 0, 0],
    depth: f32::INFINITY,
    normal: BACKGROUND_NORMAL,
    mask: [0, 0, 0],
};

/// Scene objects with their bounds precomputed for culling mesh tests.
struct Prepared<'a> {
    geometry: &'a Geometry,
    bounds: Option<(Vec3, Vec3)>,
    color: Rgb,
    instance: u32,
}

struct Frame<'a> {
    pose: &'a CameraPose,
    basis: Basis,
    objects: Vec<Prepared<'a>>,
    scene: &'a Scene,
}

impl Frame<'_> {
    fn shade_pixel(&self, index: usize) -> Pixel {
        let w = self.pose.image_width as usize;
        let (px, py) = ((index % w) as u32, (index / w) as u32);
        let ray = ray::primary_ray_with_basis(self.pose, &self.basis, px, py);

        let mut nearest: Option<(Hit, &Prepared)> = None;
        for obj in &self.objects {
            if let Some((lo, hi)) = obj.bounds {
                if !ray::ray_touches_aabb(&ray, lo, hi) {
                    continue;
                }
            }
            if let Some(hit) = intersect_geometry(&ray, obj.geometry) {
                if nearest.is_none_or(|(best, _)| hit.t < best.t) {
                    nearest = Some((hit, obj));
                }
            }
        }

        let Some((hit, obj)) = nearest else {
            return BACKGROUND;
        };
        let point = ray.at(hit.t);
        Pixel {
            lit: shade(self.scene, obj.color, hit.normal, point),
            depth: (point - self.pose.location).dot(self.basis.forward) as f32,
            normal: encode_normal(hit.normal),
            mask: instance_color(obj.instance),
        }
    }
}

/// Lambertian response summed over lights plus a constant ambient term.
fn shade(scene: &Scene, base: Rgb, normal: Vec3, point: Vec3) -> Rgb {
    let base = base.map(f64::from);
    let mut acc = base.map(|c| AMBIENT * c);
    for light in scene.lights.values() {
        let to_light = match light.kind {
            LightKind::Directional { direction } => -direction.normalized(),
            LightKind::Point { position } => {
                let d = position - point;
                if d.length() == 0.0 {
                    continue;
                }
                d.normalized()
            }
        };
        let lambert = normal.dot(to_light).max(0.0) * light.intensity;
        for ch in 0..3 {
            acc[ch] += base[ch] * light.color[ch] * lambert;
        }
    }
    acc.map(round_half_up)
}

/// Renders every modality for camera `camera_index`.
pub fn render(scene: &Scene, camera_index: u32) -> Result<RenderOutput, RenderError> {
    render_with(scene, camera_index, Execution::default())
}

pub fn render_with(
    scene: &Scene,
    camera_index: u32,
    execution: Execution,
) -> Result<RenderOutput, RenderError> {
    let pose = scene
        .camera(camera_index)
        .ok_or(RenderError::CameraNotFound(camera_index))?;
    let frame = Frame {
        pose,
        basis: camera_basis(&pose.rotation),
        objects: scene
            .objects()
            .iter()
            .map(|o| Prepared {
                geometry: &o.geometry,
                bounds: matches!(o.geometry, Geometry::Mesh(_)).then(|| o.geometry.bounds()),
                color: o.base_color,
                instance: o.instance_index,
            })
            .collect(),
        scene,
    };
    let (w, h) = (pose.image_width, pose.image_height);
    let count = w as usize * h as usize;

    let pixels: Vec<Pixel> = match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..count).into_par_iter().map(|i| frame.shade_pixel(i)).collect()
        }
        _ => (0..count).map(|i| frame.shade_pixel(i)).collect(),
    };

    let mut lit = Vec::with_capacity(3 * count);
    let mut normal = Vec::with_capacity(3 * count);
    let mut mask = Vec::with_capacity(3 * count);
    let mut depth = Vec::with_capacity(count);
    for p in pixels {
        lit.extend_from_slice(&p.lit);
        normal.extend_from_slice(&p.normal);
        mask.extend_from_slice(&p.mask);
        depth.push(p.depth);
    }
    let rgb = |data| RgbImage { width: w, height: h, data };
    Ok(RenderOutput {
        lit: rgb(lit),
        depth: DepthImage { width: w, height: h, data: depth },
        normal: rgb(normal),
        mask: rgb(mask),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Bounds, Light};
    use proptest::prelude::*;

    fn scene_with_wall(w: u32, h: u32) -> Scene {
        let mut s = Scene::empty(Bounds { min: Vec3::ZERO, max: Vec3::ZERO }).unwrap();
        let cam = s.camera_mut(0).unwrap();
        cam.image_width = w;
        cam.image_height = h;
        s.add_object(
            "wall",
            Geometry::Box {
                min: Vec3::new(300.0, -400.0, -400.0),
                max: Vec3::new(305.0, 400.0, 400.0),
            },
            [100, 150, 200],
        )
        .unwrap();
        s
    }

    #[test]
    fn instance_colors() {
        assert_eq!(instance_color(0), [1, 0, 0]);
        assert_eq!(instance_color(255), [0, 1, 0]);
        assert_eq!(instance_color(65535), [0, 0, 1]);
        assert_eq!(instance_from_color([0, 0, 0]), None);
        let mut seen = std::collections::HashSet::new();
        for i in 0..=10_000 {
            let c = instance_color(i);
            assert_ne!(c, [0, 0, 0]);
            assert!(seen.insert(c));
            assert_eq!(instance_from_color(c), Some(i));
        }
    }

    #[test]
    #[should_panic]
    fn instance_color_overflow() {
        instance_color((1 << 24) - 1);
    }

    #[test]
    fn normal_encoding() {
        assert_eq!(encode_normal(-Vec3::X), [0, 128, 128]);
        assert_eq!(encode_normal(Vec3::Z), [128, 128, 255]);
        assert_eq!(encode_normal(Vec3::ZERO), BACKGROUND_NORMAL);
    }

    #[test]
    fn wall_depth_is_planar() {
        let out = render(&scene_with_wall(64, 48), 0).unwrap();
        for (i, d) in out.depth.data.iter().enumerate() {
            assert_eq!(*d, 300.0, "pixel {i}");
        }
        assert!(out.normal.pixels().all(|c| c == [0, 128, 128]));
        assert!(out.mask.pixels().all(|c| c == [1, 0, 0]));
        // No lights: ambient only, 0.1 * base rounded half up.
        assert!(out.lit.pixels().all(|c| c == [10, 15, 20]));
    }

    #[test]
    fn empty_scene_is_background() {
        let s = Scene::empty(Bounds { min: Vec3::ZERO, max: Vec3::ZERO }).unwrap();
        let out = render(&s, 0).unwrap();
        assert_eq!(out.lit.data.len(), 640 * 480 * 3);
        assert!(out.lit.data.iter().all(|&b| b == 0));
        assert!(out.mask.data.iter().all(|&b| b == 0));
        assert!(out.depth.data.iter().all(|d| *d == f32::INFINITY));
        assert!(out.normal.pixels().all(|c| c == BACKGROUND_NORMAL));
    }

    #[test]
    fn lambert_and_clamp() {
        let mut s = scene_with_wall(8, 8);
        s.add_light(Light {
            name: "head".into(),
            kind: LightKind::Directional { direction: Vec3::X },
            intensity: 0.5,
            color: [1.0, 0.5, 0.0],
        })
        .unwrap();
        let out = render(&s, 0).unwrap();
        // base * (0.1 + color * 0.5): 100*0.6=60, 150*(0.1+0.25)=52.5→53, 200*0.1=20
        assert!(out.lit.pixels().all(|c| c == [60, 53, 20]));

        s.light_mut("head").unwrap().intensity = 10.0;
        let out = render(&s, 0).unwrap();
        assert!(out.lit.pixels().all(|c| c == [255, 255, 20]));
    }

    #[test]
    fn unknown_camera() {
        assert_eq!(render(&scene_with_wall(4, 4), 3), Err(RenderError::CameraNotFound(3)));
    }

    #[test]
    fn sequential_matches_parallel() {
        let s = scene_with_wall(33, 17);
        assert_eq!(
            render_with(&s, 0, Execution::Sequential).unwrap(),
            render_with(&s, 0, Execution::Parallel).unwrap()
        );
    }

    proptest! {
        #[test]
        fn normal_round_trip(theta in 0.0..std::f64::consts::PI, phi in 0.0..std::f64::consts::TAU) {
            let n = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let back = decode_normal(encode_normal(n));
            for i in 0..3 {
                prop_assert!((back.axis(i) - n.axis(i)).abs() <= 1.0 / 255.0 + 1e-12);
            }
        }
    }
}
