use std::path::Path;
use std::process::{Command, Output};

use planekit::exemplars::ExemplarSet;
use planekit::io::{load_annotation, load_json, save_json};
use planekit::matching::{LossBreakdown, PredictionSet, QueryPrediction};

fn planekit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planekit"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("PLANEKIT_CAMERA")
        .env_remove("PLANEKIT_SEED")
        .output()
        .expect("spawn planekit")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(dir: &Path) -> std::path::PathBuf {
    let camera = dir.join("camera.json");
    std::fs::write(
        &camera,
        r#"{"fx": 120, "fy": 120, "cx": 80, "cy": 60, "width": 160, "height": 120}"#,
    )
    .unwrap();
    let data = dir.join("data");
    let out = planekit(&["synth", "--out", s(&data), "--count", "2", "--camera", s(&camera)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn synth_annotate_evaluate_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let ann = tmp.path().join("ann");
    assert!(planekit(&["annotate", "--input", s(&data), "--out", s(&ann)]).status.success());
    let report = tmp.path().join("report.json");
    let out = planekit(&[
        "evaluate",
        "--pred",
        s(&ann),
        "--gt",
        s(&data.join("gt")),
        "--out",
        s(&report),
    ]);
    assert!(out.status.success());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("     RI↑"), "{table}");
    let json: serde_json::Value = load_json(&report).unwrap();
    assert_eq!(json["depth_recall"][0], 1.0);
    assert_eq!(json["normal_recall"][0], 1.0);
}

#[test]
fn identical_directories_score_perfectly() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let gt = data.join("gt");
    let report = tmp.path().join("r.json");
    let out = planekit(&["evaluate", "--pred", s(&gt), "--gt", s(&gt), "--domain", "outdoor", "--out", s(&report)]);
    assert!(out.status.success());
    let json: serde_json::Value = load_json(&report).unwrap();
    assert_eq!(json["rand_index"], 1.0);
    assert_eq!(json["voi"], 0.0);
    assert_eq!(json["seg_covering"], 1.0);
    assert_eq!(json["depth_recall"], serde_json::json!([1.0, 1.0, 1.0]));
}

#[test]
fn missing_camera_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = planekit(&[
        "annotate",
        "--input",
        s(tmp.path()),
        "--out",
        s(&tmp.path().join("o")),
        "--camera",
        s(&tmp.path().join("nope.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
}

#[test]
fn usage_errors_have_their_own_exit_code() {
    assert_eq!(planekit(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(planekit(&["annotate", "--bogus"]).status.code(), Some(2));
    assert!(planekit(&["--help"]).status.success());
}

#[test]
fn corrupted_annotation_is_a_format_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let dir = data.join("gt").join("00000");
    std::fs::write(dir.join("planes.json"), "{ not json").unwrap();
    let out = planekit(&["export-mesh", "--input", s(&dir), "--out", s(&tmp.path().join("m.ply"))]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn environment_overrides_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d");
    let out = Command::new(env!("CARGO_BIN_EXE_planekit"))
        .args(["synth", "--out", s(&data)])
        .env("PLANEKIT_CAMERA", s(&tmp.path().join("absent.json")))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    let out = Command::new(env!("CARGO_BIN_EXE_planekit"))
        .args(["synth", "--out", s(&data)])
        .env("PLANEKIT_JOBS", "0")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn cluster_encode_render_mesh_and_loss_check() {
    let tmp = tempfile::tempdir().unwrap();
    let data = small_dataset(tmp.path());
    let gt = data.join("gt");
    let ex_path = tmp.path().join("ex.json");
    let out = planekit(&["cluster", "--input", s(&gt), "--out", s(&ex_path), "--normals", "3", "--per-group", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let ex: ExemplarSet = load_json(&ex_path).unwrap();
    assert_eq!(ex.normals().len(), 3);

    let targets = tmp.path().join("t.json");
    assert!(planekit(&["encode", "--input", s(&gt), "--exemplars", s(&ex_path), "--out", s(&targets)])
        .status
        .success());
    let encoded: serde_json::Value = load_json(&targets).unwrap();
    assert_eq!(encoded.as_array().unwrap().len(), 2);

    let one = gt.join("00000");
    let png = tmp.path().join("d.png");
    assert!(planekit(&["render-depth", "--input", s(&one), "--out", s(&png)]).status.success());
    let ply = tmp.path().join("m.ply");
    assert!(planekit(&["export-mesh", "--input", s(&one), "--out", s(&ply)]).status.success());
    assert!(std::fs::read_to_string(&ply).unwrap().starts_with("ply\nformat ascii 1.0\n"));

    // A query per plane reproducing its mask; no class information.
    let ann = load_annotation(&one).unwrap();
    let (w, h) = (ann.width(), ann.height());
    let preds = PredictionSet {
        width: w,
        height: h,
        queries: ann
            .planes
            .iter()
            .map(|p| QueryPrediction {
                plane_prob: 1.0,
                mask_logits: (0..w * h)
                    .map(|i| if p.mask.contains_index(i as u32) { 30.0 } else { -30.0 })
                    .collect(),
                normal_class_logits: vec![0.0; 3],
                normal_residuals: vec![[0.0; 3]; 3],
                offset_class_logits: vec![0.0; 4],
                offset_residuals: vec![0.0; 4],
            })
            .collect(),
        pixel_depth: None,
        pixel_normals: None,
    };
    let dump = tmp.path().join("pred.json");
    save_json(&dump, &preds).unwrap();
    let out = planekit(&[
        "loss-check",
        "--prediction",
        s(&dump),
        "--annotation",
        s(&one),
        "--exemplars",
        s(&ex_path),
        "--depth",
        s(&png),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let losses: LossBreakdown = serde_json::from_value(report["losses"].clone()).unwrap();
    // Uniform logits: each class term is ln(class count).
    assert!((losses.l_n_c - 3f64.ln()).abs() < 1e-12);
    assert!((losses.l_d_c - 4f64.ln()).abs() < 1e-12);
    assert!(losses.l_m < 1e-6);
    let assignment = report["assignment"].as_array().unwrap();
    assert_eq!(assignment.len(), ann.planes.len());
    assert!(assignment.iter().enumerate().all(|(i, pair)| pair == &serde_json::json!([i, i])));
}
