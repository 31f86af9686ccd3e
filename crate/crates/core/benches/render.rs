//! Sequential versus data-parallel rendering of the bundled room.

use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use virtucv::render::{render_with, Execution};
use virtucv::scene::load_scene;

fn room_frame(c: &mut Criterion) {
    let mut scene = load_scene(Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/room.scene.json"))
        .expect("bundled room scene");
    let mut group = c.benchmark_group("room");
    group.sample_size(10);
    for (w, h) in [(160, 120), (640, 480)] {
        let cam = scene.camera_mut(0).unwrap();
        cam.image_width = w;
        cam.image_height = h;
        let size = format!("{w}x{h}");
        group.bench_with_input(BenchmarkId::new("sequential", &size), &scene, |b, s| {
            b.iter(|| render_with(s, 0, Execution::Sequential).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", &size), &scene, |b, s| {
            b.iter(|| render_with(s, 0, Execution::Parallel).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, room_frame);
criterion_main!(benches);
