use crate::math::Vec3;
use crate::scene::{camera_basis, CameraPose, Geometry, Mesh, SceneObject};

/// Hits closer than this are ignored to avoid self-intersection.
pub const T_EPSILON: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalized(),
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    /// Outward unit normal at the hit point.
    pub normal: Vec3,
}

/// Pinhole ray through the center of pixel (`px`, `py`); row 0 is the top of
/// the image and the horizontal field of view spans the full width.
///
/// Panics if the pixel lies outside the image.
pub fn primary_ray(pose: &CameraPose, px: u32, py: u32) -> Ray {
    assert!(
        px < pose.image_width && py < pose.image_height,
        "pixel ({px}, {py}) outside {}x{} image",
        pose.image_width,
        pose.image_height
    );
    let basis = camera_basis(&pose.rotation);
    primary_ray_with_basis(pose, &basis, px, py)
}

pub(crate) fn primary_ray_with_basis(
    pose: &CameraPose,
    basis: &crate::scene::Basis,
    px: u32,
    py: u32,
) -> Ray {
    let w = pose.image_width as f64;
    let h = pose.image_height as f64;
    let half = (pose.horizontal_fov.to_radians() * 0.5).tan();
    let sx = ((px as f64 + 0.5) / w * 2.0 - 1.0) * half;
    let sy = (1.0 - (py as f64 + 0.5) / h * 2.0) * half * h / w;
    Ray::new(pose.location, basis.forward + basis.right * sx + basis.up * sy)
}

/// Nearest hit of `ray` with the object's geometry beyond [`T_EPSILON`].
pub fn intersect(ray: &Ray, object: &SceneObject) -> Option<Hit> {
    intersect_geometry(ray, &object.geometry)
}

pub fn intersect_geometry(ray: &Ray, geometry: &Geometry) -> Option<Hit> {
    match geometry {
        Geometry::Sphere { center, radius } => intersect_sphere(ray, *center, *radius),
        Geometry::Box { min, max } => intersect_box(ray, *min, *max),
        Geometry::Mesh(mesh) => intersect_mesh(ray, mesh),
    }
}

fn intersect_sphere(ray: &Ray, center: Vec3, radius: f64) -> Option<Hit> {
    // |o + t d - c|^2 = r^2 with |d| = 1, solved in the numerically stable form.
    let oc = ray.origin - center;
    let b = oc.dot(ray.direction);
    let c = oc.dot(oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let q = if b > 0.0 { -b - sq } else { -b + sq };
    let (mut t0, mut t1) = if q == 0.0 { (0.0, 0.0) } else { (q, c / q) };
    if t0 > t1 {
        std::mem::swap(&mut t0, &mut t1);
    }
    let t = if t0 > T_EPSILON {
        t0
    } else if t1 > T_EPSILON {
        t1
    } else {
        return None;
    };
    let normal = (ray.at(t) - center) * (1.0 / radius);
    Some(Hit { t, normal })
}

fn intersect_box(ray: &Ray, min: Vec3, max: Vec3) -> Option<Hit> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut near_axis = 0;
    let mut far_axis = 0;
    for axis in 0..3 {
        let o = ray.origin.axis(axis);
        let d = ray.direction.axis(axis);
        let (lo, hi) = (min.axis(axis), max.axis(axis));
        if d == 0.0 {
            if o < lo || o > hi {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut t0, mut t1) = ((lo - o) * inv, (hi - o) * inv);
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        if t0 > t_near {
            t_near = t0;
            near_axis = axis;
        }
        if t1 < t_far {
            t_far = t1;
            far_axis = axis;
        }
    }
    if t_near > t_far {
        return None;
    }
    let axis_normal = |axis: usize, sign: f64| {
        let mut n = [0.0; 3];
        n[axis] = sign;
        Vec3::from(n)
    };
    if t_near > T_EPSILON {
        let sign = -ray.direction.axis(near_axis).signum();
        Some(Hit {
            t: t_near,
            normal: axis_normal(near_axis, sign),
        })
    } else if t_far > T_EPSILON {
        let sign = ray.direction.axis(far_axis).signum();
        Some(Hit {
            t: t_far,
            normal: axis_normal(far_axis, sign),
        })
    } else {
        None
    }
}

fn intersect_mesh(ray: &Ray, mesh: &Mesh) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for tri in &mesh.triangles {
        let [a, b, c] = tri.map(|i| mesh.vertices[i as usize]);
        if let Some(t) = intersect_triangle(ray, a, b, c) {
            if best.is_none_or(|h| t < h.t) {
                best = Some(Hit {
                    t,
                    normal: (b - a).cross(c - a).normalized(),
                });
            }
        }
    }
    best
}

/// Barycentric slack so rays through an edge shared by two triangles cannot
/// slip between them.
const EDGE_SLACK: f64 = 1e-9;

/// Möller–Trumbore; double-sided.
fn intersect_triangle(ray: &Ray, a: Vec3, b: Vec3, c: Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    // Ray parallel to the triangle's plane (relative to the triangle's size).
    if det.abs() <= 1e-12 * e1.length() * e2.length() {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - a;
    let u = s.dot(p) * inv;
    if !(-EDGE_SLACK..=1.0 + EDGE_SLACK).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv;
    if v < -EDGE_SLACK || u + v > 1.0 + EDGE_SLACK {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > T_EPSILON).then_some(t)
}

/// Slab test against an axis-aligned box, returning whether any part of the
/// ray beyond the epsilon can touch it.
pub(crate) fn ray_touches_aabb(ray: &Ray, min: Vec3, max: Vec3) -> bool {
    let mut t_near = T_EPSILON;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let o = ray.origin.axis(axis);
        let d = ray.direction.axis(axis);
        if d == 0.0 {
            if o < min.axis(axis) || o > max.axis(axis) {
                return false;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (t0, t1) = ((min.axis(axis) - o) * inv, (max.axis(axis) - o) * inv);
        t_near = t_near.max(t0.min(t1));
        t_far = t_far.min(t0.max(t1));
        if t_near > t_far {
            return false;
        }
    }
    true
}
