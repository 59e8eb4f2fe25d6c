use planekit::geometry::{synth_scene, CameraIntrinsics, SceneSpec};
use planekit::io::{
    load_depth, save_annotation, save_depth_png, save_intrinsics, save_segmentation,
    DepthEncoding, PipelineConfig,
};
use planekit::metrics::RecallSpec;
use planekit::pipeline::{
    annotate_dataset, evaluate_annotations, stem, CAMERA_FILE, DEPTH_DIR, GT_DIR, SEG_DIR,
};

#[test]
fn millimeter_png_depth_annotates_to_ground_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().join("data");
    for sub in [DEPTH_DIR, SEG_DIR, GT_DIR] {
        std::fs::create_dir_all(root.join(sub)).unwrap();
    }
    let k = CameraIntrinsics::new(120.0, 120.0, 80.0, 60.0, 160, 120).unwrap();
    save_intrinsics(&root.join(CAMERA_FILE), &k).unwrap();
    let enc = DepthEncoding::default();

    for i in 0..3 {
        let name = stem(i);
        let scene = synth_scene(
            &SceneSpec {
                plane_count: 3 + i,
                seed: 40 + i as u64,
                ..SceneSpec::default()
            },
            &k,
        )
        .unwrap();
        let png = root.join(DEPTH_DIR).join(format!("{name}.png"));
        save_depth_png(&png, &scene.depth, &enc).unwrap();

        // Quantization to whole millimeters.
        let back = load_depth(&png, &enc).unwrap();
        for (a, b) in scene.depth.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 0.5e-3 + 1e-12, "{a} vs {b}");
        }

        save_segmentation(
            &root.join(SEG_DIR).join(format!("{name}.png")),
            &root.join(SEG_DIR).join(format!("{name}.json")),
            &scene.segmentation,
        )
        .unwrap();
        save_annotation(&scene.ground_truth(), &root.join(GT_DIR).join(&name)).unwrap();
    }

    let out = tmp.path().join("ann");
    let summary = annotate_dataset(&root, &out, &k, &PipelineConfig::default(), &enc).unwrap();
    assert_eq!(summary.len(), 3);
    assert_eq!(summary.iter().map(|s| s.planes).collect::<Vec<_>>(), [3, 4, 5]);

    let report = evaluate_annotations(&out, &root.join(GT_DIR), Some(&k), &RecallSpec::indoor()).unwrap();
    assert_eq!(report.images, 3);
    assert!(report.rand_index > 0.99, "{}", report.rand_index);
    assert_eq!(report.counts.gt_planes, 12);
    for recall in [report.depth_recall.unwrap(), report.normal_recall.unwrap()] {
        assert!(recall.iter().all(|&r| r == 1.0), "{recall:?}");
    }
}
