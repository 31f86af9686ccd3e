mod common;

use std::fs;

use virtucv::dataset::{generate, read_manifest, GenConfig, GenError, HeightLevel, INCOMPLETE_MARKER};
use virtucv::image_io;
use virtucv::render::render;

#[test]
fn color_variations_share_geometry() {
    let run = common::start(common::room());
    let mut conn = run.connect();
    let mut config = GenConfig::new(run.path("out"));
    config.seed = 3;
    config.count = 1;
    config.heights = vec![HeightLevel { label: "eye".into(), z: 165.0 }];
    config.colors = vec![[200, 30, 30], [30, 30, 200]];
    let summary = generate(&mut conn, &config).unwrap();
    let [a, b] = &summary.records[..] else { panic!("expected two records") };
    assert_eq!(a.variation, "sofa_200_30_30");
    assert_eq!(b.variation, "sofa_30_30_200");
    assert_eq!((a.location, a.rotation), (b.location, b.rotation));

    let dir = run.path("out");
    let read = |name: &str| fs::read(dir.join(name)).unwrap();
    assert_eq!(read(&a.object_mask), read(&b.object_mask));
    assert_eq!(read(&a.depth), read(&b.depth));
    assert_ne!(read(&a.image), read(&b.image));

    // The original color is put back afterwards.
    assert_eq!(conn.get_object_color("sofa").unwrap(), [150, 90, 60]);
    assert_eq!(read_manifest(&summary.manifest).unwrap(), summary.records);
}

#[test]
fn recoloring_changes_only_shading() {
    let mut scene = common::room();
    scene.camera_mut(0).unwrap().location = virtucv::Vec3::new(-250.0, 0.0, 120.0);
    let before = render(&scene, 0).unwrap();
    scene.set_object_color("sofa", [30, 200, 30]).unwrap();
    let after = render(&scene, 0).unwrap();
    assert_ne!(before.lit, after.lit);
    assert_eq!(before.mask, after.mask);
    assert_eq!(before.normal, after.normal);
    assert_eq!(before.depth.data.iter().map(|d| d.to_bits()).collect::<Vec<_>>(),
               after.depth.data.iter().map(|d| d.to_bits()).collect::<Vec<_>>());
    scene.set_object_color("sofa", [30, 200, 30]).unwrap();
    assert_eq!(render(&scene, 0).unwrap(), after);
}

#[test]
fn failure_keeps_partial_output_and_marks_it() {
    let run = common::start(common::room());
    let mut conn = run.connect();
    let mut config = GenConfig::new(run.path("out"));
    config.heights = vec![HeightLevel { label: "attic".into(), z: 900.0 }];
    assert!(matches!(generate(&mut conn, &config), Err(GenError::Config(_))));
    let marker = fs::read_to_string(run.path("out").join(INCOMPLETE_MARKER)).unwrap();
    assert!(marker.contains("attic"), "{marker}");
    assert!(read_manifest(run.path("out").join("manifest.jsonl")).unwrap().is_empty());

    config.heights = vec![HeightLevel { label: "eye".into(), z: 165.0 }];
    config.colors = vec![[1, 2, 3]];
    config.vary_object = "ghost".into();
    assert!(matches!(generate(&mut conn, &config), Err(GenError::Config(_))));

    // A later successful run clears the marker.
    config.colors.clear();
    generate(&mut conn, &config).unwrap();
    assert!(!run.path("out").join(INCOMPLETE_MARKER).exists());
}

#[test]
fn manifest_files_match_a_local_render() {
    let room = common::room();
    let run = common::start(room.clone());
    let mut conn = run.connect();
    let mut config = GenConfig::new(run.path("out"));
    config.seed = 11;
    config.heights = vec![HeightLevel { label: "roomba".into(), z: 9.0 }];
    let rec = generate(&mut conn, &config).unwrap().records.remove(0);

    let mut scene = room;
    let cam = scene.camera_mut(0).unwrap();
    cam.location = rec.location.into();
    cam.rotation = rec.rotation.into();
    let expected = render(&scene, 0).unwrap();
    let dir = run.path("out");
    assert_eq!(image_io::read_png(dir.join(&rec.image)).unwrap(), expected.lit);
    assert_eq!(image_io::read_png(dir.join(&rec.object_mask)).unwrap(), expected.mask);
    assert_eq!(image_io::read_png(dir.join(&rec.normal)).unwrap(), expected.normal);
    let depth = image_io::read_pfm(dir.join(&rec.depth)).unwrap();
    assert!(depth.data.iter().zip(&expected.depth.data).all(|(a, b)| a.to_bits() == b.to_bits()));
}
