use crate::math::Vec3;
use crate::scene::{CameraPose, Rotation};

/// Camera on a sphere of radius `distance` around `center`, looking at it.
///
/// Azimuth is measured in the XY plane from +X toward +Y; elevation lifts the
/// camera toward +Z. Only location and rotation are meaningful in the result.
pub fn orbit_pose(center: Vec3, azimuth: f64, elevation: f64, distance: f64) -> CameraPose {
    let (sa, ca) = azimuth.to_radians().sin_cos();
    let (se, ce) = elevation.to_radians().sin_cos();
    CameraPose {
        location: center + Vec3::new(ce * ca, ce * sa, se) * distance,
        rotation: Rotation::new((azimuth + 180.0).rem_euclid(360.0), -elevation, 0.0),
        ..CameraPose::default()
    }
}
