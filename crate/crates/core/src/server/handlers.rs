//! The command catalog.
//!
//! VGET handlers receive the scene by shared reference, so a read can never
//! mutate world state; the output store is the only thing they may advance.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use thiserror::Error;

use super::router::{Params, Router};
use crate::image_io::{self, ImageError};
use crate::math::Vec3;
use crate::protocol::{fmt_real, fmt_reals, Action, Command};
use crate::render::{self, RenderOutput};
use crate::scene::{Rgb, Rotation, Scene};

#[derive(Debug, Error)]
pub enum HandlerError {
    #[error("unknown command")]
    UnknownCommand,
    #[error("invalid arguments")]
    InvalidArguments,
    #[error("not found")]
    NotFound,
    #[error("internal {0}")]
    Internal(String),
}

impl From<ImageError> for HandlerError {
    fn from(e: ImageError) -> Self {
        HandlerError::Internal(e.to_string())
    }
}

type Reply = Result<String, HandlerError>;
pub type GetFn = fn(&Scene, &mut OutputStore, &Params, &[String]) -> Reply;
pub type SetFn = fn(&mut Scene, &Params, &[String]) -> Reply;

#[derive(Clone, Copy)]
pub enum Handler {
    Get(GetFn),
    Set(SetFn),
}

/// Names rendered files `<dir>/<seq:06>_<modality>.<ext>` with one sequence
/// shared by every modality.
#[derive(Debug)]
pub struct OutputStore {
    dir: PathBuf,
    next_seq: u64,
    /// Last render, keyed by camera id and scene digest; consecutive
    /// captures of an unchanged view share one render.
    last: Option<(u32, String, RenderOutput)>,
}

impl OutputStore {
    /// Creates `dir` if needed; returned paths are absolute.
    pub fn new(dir: impl AsRef<Path>) -> io::Result<Self> {
        fs::create_dir_all(dir.as_ref())?;
        Ok(OutputStore {
            dir: fs::canonicalize(dir)?,
            next_seq: 0,
            last: None,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn render(&mut self, scene: &Scene, camera: u32) -> Result<(), HandlerError> {
        let digest = scene.state_digest();
        let fresh = matches!(&self.last, Some((c, d, _)) if *c == camera && *d == digest);
        if !fresh {
            let out = render::render(scene, camera).map_err(|_| HandlerError::NotFound)?;
            self.last = Some((camera, digest, out));
        }
        Ok(())
    }

    fn last_render(&self) -> &RenderOutput {
        &self.last.as_ref().expect("render precedes use").2
    }

    pub fn next_path(&mut self, modality: &str, ext: &str) -> PathBuf {
        let path = self.dir.join(format!("{:06}_{modality}.{ext}", self.next_seq));
        self.next_seq += 1;
        path
    }
}

/// The full catalog, built once.
pub fn catalog() -> &'static Router<Handler> {
    static CATALOG: OnceLock<Router<Handler>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        use Action::{Get, Set};
        use Handler as H;
        let entries: [(Action, &str, Handler); 21] = [
            (Get, "/objects", H::Get(get_objects)),
            (Get, "/scene/bounds", H::Get(get_scene_bounds)),
            (Get, "/camera/{id}/location", H::Get(get_camera_location)),
            (Set, "/camera/{id}/location", H::Set(set_camera_location)),
            (Get, "/camera/{id}/position", H::Get(get_camera_location)),
            (Set, "/camera/{id}/position", H::Set(set_camera_location)),
            (Get, "/camera/{id}/rotation", H::Get(get_camera_rotation)),
            (Set, "/camera/{id}/rotation", H::Set(set_camera_rotation)),
            (Get, "/camera/{id}/image", H::Get(get_image)),
            (Get, "/camera/{id}/depth", H::Get(get_depth)),
            (Get, "/camera/{id}/object_mask", H::Get(get_object_mask)),
            (Get, "/camera/{id}/normal", H::Get(get_normal)),
            (Get, "/light/{name}/intensity", H::Get(get_light_intensity)),
            (Set, "/light/{name}/intensity", H::Set(set_light_intensity)),
            (Get, "/light/{name}/color", H::Get(get_light_color)),
            (Set, "/light/{name}/color", H::Set(set_light_color)),
            (Get, "/object/{name}/color", H::Get(get_object_color)),
            (Set, "/object/{name}/color", H::Set(set_object_color)),
            (Get, "/object/{name}/location", H::Get(get_object_location)),
            (Set, "/object/{name}/location", H::Set(set_object_location)),
            (Get, "/object/{name}/bounds", H::Get(get_object_bounds)),
        ];
        let mut router = Router::default();
        for (action, pattern, handler) in entries {
            router.add(action, pattern, handler).expect("catalog routes are disjoint");
        }
        router
    })
}

/// Executes one command against the world.
pub fn handle(command: &Command, scene: &mut Scene, store: &mut OutputStore) -> Reply {
    let (route, params) = catalog()
        .lookup(command.action, &command.path)
        .ok_or(HandlerError::UnknownCommand)?;
    match route.handler {
        Handler::Get(f) => f(scene, store, &params, &command.args),
        Handler::Set(f) => f(scene, &params, &command.args),
    }
}

fn reals<const N: usize>(args: &[String]) -> Result<[f64; N], HandlerError> {
    if args.len() != N {
        return Err(HandlerError::InvalidArguments);
    }
    let mut out = [0.0; N];
    for (slot, arg) in out.iter_mut().zip(args) {
        let v: f64 = arg.parse().map_err(|_| HandlerError::InvalidArguments)?;
        if !v.is_finite() {
            return Err(HandlerError::InvalidArguments);
        }
        *slot = v;
    }
    Ok(out)
}

fn no_args(args: &[String]) -> Result<(), HandlerError> {
    if args.is_empty() {
        Ok(())
    } else {
        Err(HandlerError::InvalidArguments)
    }
}

fn rgb8(args: &[String]) -> Result<Rgb, HandlerError> {
    if args.len() != 3 {
        return Err(HandlerError::InvalidArguments);
    }
    let mut out = [0u8; 3];
    for (slot, arg) in out.iter_mut().zip(args) {
        *slot = arg.parse().map_err(|_| HandlerError::InvalidArguments)?;
    }
    Ok(out)
}

fn camera_id(params: &Params) -> Result<u32, HandlerError> {
    params
        .get("id")
        .and_then(|s| s.parse().ok())
        .ok_or(HandlerError::NotFound)
}

fn name(params: &Params) -> &str {
    params.get("name").unwrap_or_default()
}

fn get_objects(scene: &Scene, _: &mut OutputStore, _: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let names: Vec<&str> = scene.objects().iter().map(|o| o.name.as_str()).collect();
    Ok(names.join(" "))
}

fn get_scene_bounds(scene: &Scene, _: &mut OutputStore, _: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let b = scene.free_space_bounds;
    Ok(fmt_reals(&[b.min.x, b.min.y, b.min.z, b.max.x, b.max.y, b.max.z]))
}

fn get_camera_location(scene: &Scene, _: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let cam = scene.camera(camera_id(params)?).ok_or(HandlerError::NotFound)?;
    Ok(fmt_reals(&cam.location.to_array()))
}

fn set_camera_location(scene: &mut Scene, params: &Params, args: &[String]) -> Reply {
    let cam = scene.camera_mut(camera_id(params)?).ok_or(HandlerError::NotFound)?;
    cam.location = Vec3::from(reals::<3>(args)?);
    Ok("ok".into())
}

fn get_camera_rotation(scene: &Scene, _: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let cam = scene.camera(camera_id(params)?).ok_or(HandlerError::NotFound)?;
    let r = cam.rotation;
    Ok(fmt_reals(&[r.yaw, r.pitch, r.roll]))
}

fn set_camera_rotation(scene: &mut Scene, params: &Params, args: &[String]) -> Reply {
    let cam = scene.camera_mut(camera_id(params)?).ok_or(HandlerError::NotFound)?;
    cam.rotation = Rotation::from(reals::<3>(args)?);
    Ok("ok".into())
}

fn render_camera(scene: &Scene, store: &mut OutputStore, params: &Params, args: &[String]) -> Result<(), HandlerError> {
    no_args(args)?;
    store.render(scene, camera_id(params)?)
}

fn path_reply(path: &Path) -> Reply {
    Ok(path.display().to_string())
}

fn get_image(scene: &Scene, store: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    render_camera(scene, store, params, args)?;
    let path = store.next_path("image", "png");
    image_io::write_png(&path, &store.last_render().lit)?;
    path_reply(&path)
}

fn get_depth(scene: &Scene, store: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    render_camera(scene, store, params, args)?;
    let path = store.next_path("depth", "pfm");
    image_io::write_pfm(&path, &store.last_render().depth)?;
    path_reply(&path)
}

fn get_object_mask(scene: &Scene, store: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    render_camera(scene, store, params, args)?;
    let path = store.next_path("object_mask", "png");
    image_io::write_png(&path, &store.last_render().mask)?;
    path_reply(&path)
}

fn get_normal(scene: &Scene, store: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    render_camera(scene, store, params, args)?;
    let path = store.next_path("normal", "png");
    image_io::write_png(&path, &store.last_render().normal)?;
    path_reply(&path)
}

fn get_light_intensity(scene: &Scene, _: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let light = scene.lights.get(name(params)).ok_or(HandlerError::NotFound)?;
    Ok(fmt_real(light.intensity))
}

fn set_light_intensity(scene: &mut Scene, params: &Params, args: &[String]) -> Reply {
    let light = scene.light_mut(name(params)).map_err(|_| HandlerError::NotFound)?;
    let [v] = reals::<1>(args)?;
    if v < 0.0 {
        return Err(HandlerError::InvalidArguments);
    }
    light.intensity = v;
    Ok("ok".into())
}

/// Components are reported on the 0-255 scale used by the setter.
fn get_light_color(scene: &Scene, _: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let light = scene.lights.get(name(params)).ok_or(HandlerError::NotFound)?;
    Ok(fmt_reals(&light.color.map(|c| c * 255.0)))
}

fn set_light_color(scene: &mut Scene, params: &Params, args: &[String]) -> Reply {
    let light = scene.light_mut(name(params)).map_err(|_| HandlerError::NotFound)?;
    let rgb = reals::<3>(args)?;
    if rgb.iter().any(|c| !(0.0..=255.0).contains(c)) {
        return Err(HandlerError::InvalidArguments);
    }
    light.color = rgb.map(|c| c / 255.0);
    Ok("ok".into())
}

fn get_object_color(scene: &Scene, _: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let obj = scene.object(name(params)).ok_or(HandlerError::NotFound)?;
    let [r, g, b] = obj.base_color;
    Ok(format!("{r} {g} {b}"))
}

fn set_object_color(scene: &mut Scene, params: &Params, args: &[String]) -> Reply {
    if scene.object(name(params)).is_none() {
        return Err(HandlerError::NotFound);
    }
    let color = rgb8(args)?;
    scene
        .set_object_color(name(params), color)
        .map_err(|_| HandlerError::NotFound)?;
    Ok("ok".into())
}

fn get_object_location(scene: &Scene, _: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let obj = scene.object(name(params)).ok_or(HandlerError::NotFound)?;
    Ok(fmt_reals(&obj.geometry.center().to_array()))
}

fn set_object_location(scene: &mut Scene, params: &Params, args: &[String]) -> Reply {
    if scene.object(name(params)).is_none() {
        return Err(HandlerError::NotFound);
    }
    let loc = Vec3::from(reals::<3>(args)?);
    scene
        .set_object_location(name(params), loc)
        .map_err(|_| HandlerError::NotFound)?;
    Ok("ok".into())
}

fn get_object_bounds(scene: &Scene, _: &mut OutputStore, params: &Params, args: &[String]) -> Reply {
    no_args(args)?;
    let obj = scene.object(name(params)).ok_or(HandlerError::NotFound)?;
    let (lo, hi) = obj.geometry.bounds();
    Ok(fmt_reals(&[lo.x, lo.y, lo.z, hi.x, hi.y, hi.z]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::parse_command;
    use crate::scene::{Bounds, Geometry, Light, LightKind};

    fn world() -> (Scene, OutputStore, tempfile::TempDir) {
        let mut s = Scene::empty(Bounds { min: Vec3::ZERO, max: Vec3::new(10.0, 10.0, 10.0) }).unwrap();
        let cam = s.camera_mut(0).unwrap();
        cam.image_width = 16;
        cam.image_height = 12;
        s.add_object(
            "sofa",
            Geometry::Box { min: Vec3::new(100.0, -20.0, -20.0), max: Vec3::new(120.0, 20.0, 20.0) },
            [90, 60, 30],
        )
        .unwrap();
        s.add_light(Light {
            name: "lamp".into(),
            kind: LightKind::Point { position: Vec3::ZERO },
            intensity: 1.0,
            color: [1.0; 3],
        })
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = OutputStore::new(dir.path().join("out")).unwrap();
        (s, store, dir)
    }

    fn run(scene: &mut Scene, store: &mut OutputStore, text: &str) -> Reply {
        handle(&parse_command(text).unwrap(), scene, store)
    }

    #[test]
    fn camera_round_trips() {
        let (mut s, mut st, _d) = world();
        assert_eq!(run(&mut s, &mut st, "vget /camera/0/rotation").unwrap(), "0 0 0");
        assert_eq!(run(&mut s, &mut st, "vset /camera/0/location 10 20 30").unwrap(), "ok");
        assert_eq!(run(&mut s, &mut st, "vget /camera/0/location").unwrap(), "10 20 30");
        assert_eq!(run(&mut s, &mut st, "vset /camera/0/position 0 0 0").unwrap(), "ok");
        assert_eq!(run(&mut s, &mut st, "vget /camera/0/location").unwrap(), "0 0 0");
        assert_eq!(run(&mut s, &mut st, "vset /camera/0/rotation 370.5 -12 0.1").unwrap(), "ok");
        assert_eq!(run(&mut s, &mut st, "vget /camera/0/rotation").unwrap(), "370.5 -12 0.1");
    }

    #[test]
    fn error_kinds() {
        let (mut s, mut st, _d) = world();
        assert!(matches!(run(&mut s, &mut st, "vget /camera/99/image"), Err(HandlerError::NotFound)));
        assert!(matches!(run(&mut s, &mut st, "vget /bogus"), Err(HandlerError::UnknownCommand)));
        assert!(matches!(run(&mut s, &mut st, "vset /objects"), Err(HandlerError::UnknownCommand)));
        assert!(matches!(
            run(&mut s, &mut st, "vset /camera/0/location 1 2"),
            Err(HandlerError::InvalidArguments)
        ));
        assert!(matches!(
            run(&mut s, &mut st, "vset /camera/0/location 1 2 x"),
            Err(HandlerError::InvalidArguments)
        ));
        assert!(matches!(
            run(&mut s, &mut st, "vset /camera/0/location 1 2 inf"),
            Err(HandlerError::InvalidArguments)
        ));
        assert!(matches!(
            run(&mut s, &mut st, "vset /object/sofa/color 256 0 0"),
            Err(HandlerError::InvalidArguments)
        ));
        assert!(matches!(
            run(&mut s, &mut st, "vset /light/nope/intensity 1"),
            Err(HandlerError::NotFound)
        ));
        assert!(matches!(run(&mut s, &mut st, "vget /objects extra"), Err(HandlerError::InvalidArguments)));
    }

    #[test]
    fn light_and_object_setters() {
        let (mut s, mut st, _d) = world();
        run(&mut s, &mut st, "vset /light/lamp/intensity 2.5").unwrap();
        assert_eq!(run(&mut s, &mut st, "vget /light/lamp/intensity").unwrap(), "2.5");
        run(&mut s, &mut st, "vset /light/lamp/color 255 0 0").unwrap();
        assert_eq!(s.lights["lamp"].color, [1.0, 0.0, 0.0]);
        assert_eq!(run(&mut s, &mut st, "vget /light/lamp/color").unwrap(), "255 0 0");
        run(&mut s, &mut st, "vset /object/sofa/color 200 30 30").unwrap();
        assert_eq!(run(&mut s, &mut st, "vget /object/sofa/color").unwrap(), "200 30 30");
        assert_eq!(run(&mut s, &mut st, "vget /object/sofa/location").unwrap(), "110 0 0");
        run(&mut s, &mut st, "vset /object/sofa/location 0 0 5").unwrap();
        assert_eq!(run(&mut s, &mut st, "vget /object/sofa/bounds").unwrap(), "-10 -20 -15 10 20 25");
        assert_eq!(run(&mut s, &mut st, "vget /objects").unwrap(), "sofa");
        assert_eq!(run(&mut s, &mut st, "vget /scene/bounds").unwrap(), "0 0 0 10 10 10");
    }

    #[test]
    fn captures_write_sequenced_files() {
        let (mut s, mut st, _d) = world();
        let img = run(&mut s, &mut st, "vget /camera/0/image").unwrap();
        let depth = run(&mut s, &mut st, "vget /camera/0/depth").unwrap();
        let mask = run(&mut s, &mut st, "vget /camera/0/object_mask").unwrap();
        let normal = run(&mut s, &mut st, "vget /camera/0/normal").unwrap();
        assert!(img.ends_with("000000_image.png"));
        assert!(depth.ends_with("000001_depth.pfm"));
        assert!(mask.ends_with("000002_object_mask.png"));
        assert!(normal.ends_with("000003_normal.png"));
        for p in [&img, &depth, &mask, &normal] {
            assert!(Path::new(p).is_absolute() && Path::new(p).exists());
        }
        let expected = render::render(&s, 0).unwrap();
        assert_eq!(image_io::read_png(&img).unwrap(), expected.lit);
        assert_eq!(image_io::read_png(&mask).unwrap(), expected.mask);
        assert_eq!(image_io::read_png(&normal).unwrap(), expected.normal);
        assert_eq!(image_io::read_pfm(&depth).unwrap(), expected.depth);
    }

    #[test]
    fn catalog_routes_pairwise_disjoint() {
        use super::super::router::patterns_overlap;
        let routes = catalog().routes();
        for (i, a) in routes.iter().enumerate() {
            for b in &routes[i + 1..] {
                assert!(
                    a.action != b.action || !patterns_overlap(a.segments(), b.segments()),
                    "{} overlaps {}",
                    a.pattern,
                    b.pattern
                );
            }
        }
    }
}
