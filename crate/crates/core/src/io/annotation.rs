use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::json::{load_json, save_json};
use super::raster::{read_gray_png, write_gray_png};
use crate::error::{Error, Result};
use crate::fitting::{PlaneAnnotation, PlaneInstance};
use crate::geometry::{CameraIntrinsics, Mesh, PixelMask, Plane};

pub const LABELS_FILE: &str = "planes.png";
pub const SIDECAR_FILE: &str = "planes.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlaneEntry {
    id: u32,
    normal: [f64; 3],
    offset: f64,
    inlier_count: usize,
    mean_fit_error: f64,
    mean_depth: f64,
    semantic_class: String,
    instance_id: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    camera: CameraIntrinsics,
    planes: Vec<PlaneEntry>,
}

/// Writes `planes.png` (label `k` = plane `k`, `0` = non-planar) and `planes.json`.
pub fn save_annotation(a: &PlaneAnnotation, dir: &Path) -> Result<()> {
    if a.planes.len() > u16::MAX as usize {
        return Err(Error::Domain(format!(
            "{} planes do not fit a 16-bit label raster",
            a.planes.len()
        )));
    }
    let labels = a.label_raster();
    let labeled = labels.iter().filter(|&&l| l > 0).count();
    if labeled != a.planes.iter().map(|p| p.mask.len()).sum::<usize>() {
        return Err(Error::Config("plane masks overlap".into()));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_gray_png(&dir.join(LABELS_FILE), a.width(), a.height(), &labels)?;
    let sidecar = Sidecar {
        camera: a.camera,
        planes: a
            .planes
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let n = p.plane.normal();
                PlaneEntry {
                    id: k as u32 + 1,
                    normal: [n.x, n.y, n.z],
                    offset: p.plane.offset(),
                    inlier_count: p.inlier_count,
                    mean_fit_error: p.mean_fit_error,
                    mean_depth: p.mean_depth,
                    semantic_class: p.semantic_class.clone(),
                    instance_id: p.instance_id,
                }
            })
            .collect(),
    };
    save_json(&dir.join(SIDECAR_FILE), &sidecar)
}

pub fn load_annotation(dir: &Path) -> Result<PlaneAnnotation> {
    let json_path = dir.join(SIDECAR_FILE);
    let png_path = dir.join(LABELS_FILE);
    let sidecar: Sidecar = load_json(&json_path)?;
    let camera = sidecar.camera;
    camera
        .validate()
        .map_err(|e| Error::format(&json_path, e.to_string()))?;
    let img = read_gray_png(&png_path)?;
    if (img.width, img.height) != (camera.width, camera.height) {
        return Err(Error::format(
            &png_path,
            format!(
                "label raster is {}x{} but the camera is {}x{}",
                img.width, img.height, camera.width, camera.height
            ),
        ));
    }
    let count = sidecar.planes.len();
    let mut buckets = vec![Vec::new(); count];
    for (i, &label) in img.values.iter().enumerate() {
        if label == 0 {
            continue;
        }
        let Some(bucket) = buckets.get_mut(label as usize - 1) else {
            return Err(Error::format(
                &png_path,
                format!("label {label} has no sidecar entry ({count} planes)"),
            ));
        };
        bucket.push(i as u32);
    }
    let mut planes = Vec::with_capacity(count);
    for (k, (entry, indices)) in sidecar.planes.into_iter().zip(buckets).enumerate() {
        if entry.id as usize != k + 1 {
            return Err(Error::format(
                &json_path,
                format!("plane {} listed at position {}", entry.id, k + 1),
            ));
        }
        let plane = Plane::from_canonical(Vector3::from(entry.normal), entry.offset)
            .map_err(|e| Error::format(&json_path, format!("plane {}: {e}", entry.id)))?;
        planes.push(PlaneInstance {
            plane,
            mask: PixelMask::from_indices(camera.width, camera.height, indices)?,
            inlier_count: entry.inlier_count,
            mean_fit_error: entry.mean_fit_error,
            mean_depth: entry.mean_depth,
            instance_id: entry.instance_id,
            semantic_class: entry.semantic_class,
        });
    }
    Ok(PlaneAnnotation { camera, planes })
}

pub fn load_intrinsics(path: &Path) -> Result<CameraIntrinsics> {
    let k: CameraIntrinsics = load_json(path)?;
    k.validate()?;
    Ok(k)
}

pub fn save_intrinsics(path: &Path, k: &CameraIntrinsics) -> Result<()> {
    save_json(path, k)
}

pub fn save_mesh(path: &Path, mesh: &Mesh) -> Result<()> {
    super::raster::write_bytes(path, mesh.to_ply().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{synth_scene, SceneSpec};

    fn scene_annotation(planes: usize) -> PlaneAnnotation {
        let k = CameraIntrinsics::new(100.0, 100.0, 60.0, 40.0, 120, 80).unwrap();
        let scene = synth_scene(
            &SceneSpec {
                plane_count: planes,
                seed: 3,
                ..SceneSpec::default()
            },
            &k,
        )
        .unwrap();
        let mut a = scene.ground_truth();
        for (i, p) in a.planes.iter_mut().enumerate() {
            p.mean_fit_error = 0.1 / (i as f64 + 3.0);
        }
        a
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let a = scene_annotation(5);
        save_annotation(&a, dir.path()).unwrap();
        assert_eq!(load_annotation(dir.path()).unwrap(), a);
    }

    #[test]
    fn sixty_four_planes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = scene_annotation(64);
        assert_eq!(a.planes.len(), 64);
        save_annotation(&a, dir.path()).unwrap();
        let back = load_annotation(dir.path()).unwrap();
        for (x, y) in a.planes.iter().zip(&back.planes) {
            assert_eq!(x.plane.normal().map(f64::to_bits), y.plane.normal().map(f64::to_bits));
            assert_eq!(x.plane.offset().to_bits(), y.plane.offset().to_bits());
            assert_eq!(x.mean_depth.to_bits(), y.mean_depth.to_bits());
        }
        assert_eq!(back, a);
    }

    #[test]
    fn serialization_is_deterministic_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        let a = scene_annotation(3);
        save_annotation(&a, &dir.path().join("x")).unwrap();
        save_annotation(&a, &dir.path().join("y")).unwrap();
        for f in [LABELS_FILE, SIDECAR_FILE] {
            assert_eq!(
                std::fs::read(dir.path().join("x").join(f)).unwrap(),
                std::fs::read(dir.path().join("y").join(f)).unwrap()
            );
        }
        let text = std::fs::read_to_string(dir.path().join("x").join(SIDECAR_FILE)).unwrap();
        let keys: Vec<usize> = ["\"id\"", "\"inlier_count\"", "\"instance_id\"", "\"mean_depth\"", "\"normal\""]
            .iter()
            .map(|k| text.find(k).unwrap())
            .collect();
        assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn corrupted_sidecar_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        save_annotation(&scene_annotation(3), dir.path()).unwrap();
        let path = dir.path().join(SIDECAR_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_annotation(dir.path()), Err(Error::Format { .. })));

        // Drop the last plane: its raster label is now unexplained.
        save_annotation(&scene_annotation(3), dir.path()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        v["planes"].as_array_mut().unwrap().pop();
        std::fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(load_annotation(dir.path()), Err(Error::Format { .. })));

        // Non-unit normal.
        save_annotation(&scene_annotation(3), dir.path()).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        v["planes"][0]["normal"] = serde_json::json!([0.0, 0.0, 2.0]);
        std::fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(load_annotation(dir.path()), Err(Error::Format { .. })));
    }

    #[test]
    fn intrinsics_validation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.json");
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap();
        save_intrinsics(&path, &k).unwrap();
        assert_eq!(load_intrinsics(&path).unwrap(), k);
        std::fs::write(&path, r#"{"fx":0,"fy":1,"cx":1,"cy":1,"width":4,"height":4}"#).unwrap();
        assert!(matches!(load_intrinsics(&path), Err(Error::Config(_))));
    }
}
