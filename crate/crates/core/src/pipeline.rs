//! Directory-level batch operations behind the command-line tool.
//!
//! Dataset layout:
//!
//! ```text
//! <root>/camera.json
//! <root>/depth/<stem>.f32 | <stem>.png
//! <root>/seg/<stem>.png, <root>/seg/<stem>.json
//! <root>/gt/<stem>/planes.png, planes.json
//! ```
//!
//! An annotation root is a directory of `<stem>/` annotation directories (or a single
//! annotation directory). Images are processed on a bounded pool and results are always
//! returned in stem order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exemplars::{encode_plane, ExemplarSet, PlaneTarget};
use crate::fitting::{annotate_image, PlaneAnnotation};
use crate::geometry::{export_mesh, synth_scene, CameraIntrinsics, DepthMap, SceneSpec};
use crate::io::{
    load_annotation, load_depth, load_json, load_segmentation, save_annotation, save_depth,
    save_depth_raw, save_intrinsics, save_mesh, save_segmentation, DepthEncoding, PipelineConfig,
    SIDECAR_FILE,
};
use crate::matching::{
    compute_losses, hungarian, matching_cost, LossBreakdown, LossInputs, LossWeights,
    PredictionSet,
};
use crate::metrics::{evaluate_image, EvalReport, RecallSpec};

pub const CAMERA_FILE: &str = "camera.json";
pub const DEPTH_DIR: &str = "depth";
pub const SEG_DIR: &str = "seg";
pub const GT_DIR: &str = "gt";

/// Runs `f` on a dedicated pool of `jobs` threads.
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    entries.sort();
    Ok(entries)
}

/// Depth files of a dataset, `(stem, path)` in stem order.
pub fn depth_files(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    let dir = root.join(DEPTH_DIR);
    Ok(read_dir_sorted(&dir)?
        .into_iter()
        .filter(|p| p.is_file())
        .filter_map(|p| Some((p.file_stem()?.to_str()?.to_string(), p)))
        .collect())
}

/// Annotation directories below `root`, `(name, dir)` in name order.
pub fn annotation_dirs(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    if root.join(SIDECAR_FILE).is_file() {
        let name = root
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or("annotation")
            .to_string();
        return Ok(vec![(name, root.to_path_buf())]);
    }
    Ok(read_dir_sorted(root)?
        .into_iter()
        .filter(|p| p.join(SIDECAR_FILE).is_file())
        .filter_map(|p| Some((p.file_name()?.to_str()?.to_string(), p)))
        .collect())
}

/// Stem of image `index`.
pub fn stem(index: usize) -> String {
    format!("{index:05}")
}

/// Writes `count` synthetic scenes; scene `i` uses seed `spec.seed + i`.
pub fn synth_dataset(
    root: &Path,
    k: &CameraIntrinsics,
    spec: &SceneSpec,
    count: usize,
) -> Result<Vec<String>> {
    spec.validate()?;
    for sub in [DEPTH_DIR, SEG_DIR, GT_DIR] {
        std::fs::create_dir_all(root.join(sub)).map_err(|e| Error::io(root.join(sub), e))?;
    }
    save_intrinsics(&root.join(CAMERA_FILE), k)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let name = stem(i);
            let scene = synth_scene(
                &SceneSpec {
                    seed: spec.seed.wrapping_add(i as u64),
                    ..*spec
                },
                k,
            )?;
            save_depth_raw(&root.join(DEPTH_DIR).join(format!("{name}.f32")), &scene.depth)?;
            save_segmentation(
                &root.join(SEG_DIR).join(format!("{name}.png")),
                &root.join(SEG_DIR).join(format!("{name}.json")),
                &scene.segmentation,
            )?;
            save_annotation(&scene.ground_truth(), &root.join(GT_DIR).join(&name))?;
            log::info!("synth {name}: {} planes", scene.planes.len());
            Ok(name)
        })
        .collect()
}

/// Camera for a raster of `width × height`: `k` itself, or `k` rescaled with a warning.
pub fn camera_for_raster(k: &CameraIntrinsics, width: usize, height: usize) -> Result<CameraIntrinsics> {
    if (k.width, k.height) == (width, height) {
        return Ok(*k);
    }
    let scaled = k.scaled(width as f64 / k.width as f64, height as f64 / k.height as f64)?;
    log::warn!(
        "raster is {width}x{height} but the camera is {}x{}; rescaling intrinsics",
        k.width,
        k.height
    );
    Ok(scaled)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotateSummary {
    pub name: String,
    pub planes: usize,
}

/// Annotates every image of a dataset into `out/<stem>/`.
pub fn annotate_dataset(
    root: &Path,
    out: &Path,
    k: &CameraIntrinsics,
    cfg: &PipelineConfig,
    enc: &DepthEncoding,
) -> Result<Vec<AnnotateSummary>> {
    cfg.validate()?;
    let files = depth_files(root)?;
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no depth files in {}",
            root.join(DEPTH_DIR).display()
        )));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    files
        .par_iter()
        .map(|(name, depth_path)| {
            let depth = load_depth(depth_path, enc)?;
            let seg_dir = root.join(SEG_DIR);
            let table = seg_dir.join(format!("{name}.json"));
            let seg = load_segmentation(
                &seg_dir.join(format!("{name}.png")),
                table.is_file().then_some(table.as_path()),
            )?;
            let camera = camera_for_raster(k, depth.width(), depth.height())?;
            let ann = annotate_image(&depth, &seg, &camera, &cfg.ranges, &cfg.fitting)?;
            save_annotation(&ann, &out.join(name))?;
            log::info!("annotate {name}: {} planes", ann.planes.len());
            Ok(AnnotateSummary {
                name: name.clone(),
                planes: ann.planes.len(),
            })
        })
        .collect()
}

pub fn load_annotations(root: &Path) -> Result<Vec<(String, PlaneAnnotation)>> {
    annotation_dirs(root)?
        .into_par_iter()
        .map(|(name, dir)| Ok((name, load_annotation(&dir)?)))
        .collect()
}

/// Options of [`cluster_annotations`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    pub normal_count: usize,
    pub split: f64,
    pub per_group: usize,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            normal_count: crate::exemplars::DEFAULT_NORMAL_EXEMPLARS,
            split: crate::exemplars::DEFAULT_OFFSET_SPLIT,
            per_group: crate::exemplars::DEFAULT_OFFSETS_PER_GROUP,
            seed: 0,
        }
    }
}

/// Clusters the planes of every annotation below `root`.
pub fn cluster_annotations(root: &Path, opts: &ClusterOptions) -> Result<(ExemplarSet, Vec<String>)> {
    let planes: Vec<_> = load_annotations(root)?
        .iter()
        .flat_map(|(_, a)| a.planes.iter().map(|p| p.plane))
        .collect();
    if planes.is_empty() {
        return Err(Error::Config(format!(
            "no planes found under {}",
            root.display()
        )));
    }
    ExemplarSet::from_planes(&planes, opts.normal_count, opts.split, opts.per_group, opts.seed)
}

/// Exemplar target of one annotated plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetEntry {
    pub plane_id: u32,
    pub normal_class: usize,
    pub normal_residual: [f64; 3],
    pub offset_class: usize,
    pub offset_residual: f64,
}

impl From<(u32, PlaneTarget)> for TargetEntry {
    fn from((plane_id, t): (u32, PlaneTarget)) -> Self {
        TargetEntry {
            plane_id,
            normal_class: t.normal_class,
            normal_residual: t.normal_residual.into(),
            offset_class: t.offset_class,
            offset_residual: t.offset_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedImage {
    pub name: String,
    pub targets: Vec<TargetEntry>,
}

pub fn encode_annotations(root: &Path, exemplars: &ExemplarSet) -> Result<Vec<EncodedImage>> {
    Ok(load_annotations(root)?
        .into_iter()
        .map(|(name, a)| EncodedImage {
            name,
            targets: a
                .planes
                .iter()
                .enumerate()
                .map(|(k, p)| (k as u32 + 1, encode_plane(&p.plane, exemplars)).into())
                .collect(),
        })
        .collect())
}

/// Evaluates every ground-truth annotation against the prediction of the same name. A
/// missing prediction counts as an empty one.
pub fn evaluate_annotations(
    pred_root: &Path,
    gt_root: &Path,
    camera: Option<&CameraIntrinsics>,
    spec: &RecallSpec,
) -> Result<EvalReport> {
    spec.validate()?;
    let gts = annotation_dirs(gt_root)?;
    if gts.is_empty() {
        return Err(Error::Config(format!(
            "no annotations under {}",
            gt_root.display()
        )));
    }
    let single_pred = pred_root.join(SIDECAR_FILE).is_file();
    let evals = gts
        .par_iter()
        .map(|(name, gt_dir)| {
            let gt = load_annotation(gt_dir)?;
            if let Some(k) = camera {
                if *k != gt.camera {
                    return Err(Error::Config(format!(
                        "{name}: ground-truth camera differs from the camera file"
                    )));
                }
            }
            let pred_dir = if single_pred {
                pred_root.to_path_buf()
            } else {
                pred_root.join(name)
            };
            let pred = if pred_dir.join(SIDECAR_FILE).is_file() {
                load_annotation(&pred_dir)?
            } else {
                log::warn!("{name}: no prediction, counting it as empty");
                PlaneAnnotation::empty(gt.camera)
            };
            let eval = evaluate_image(name, &pred, &gt, spec)?;
            log::info!("evaluate {name}: {} of {} planes matched", eval.pairs.len(), gt.planes.len());
            Ok(eval)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_images(evals, spec))
}

/// Planar depth of an annotation: every plane rendered over its own mask.
pub fn render_depth_file(ann_dir: &Path, out: &Path, enc: &DepthEncoding) -> Result<DepthMap> {
    let depth = load_annotation(ann_dir)?.planar_depth();
    save_depth(out, &depth, enc)?;
    Ok(depth)
}

pub fn export_mesh_file(ann_dir: &Path, out: &Path) -> Result<usize> {
    let ann = load_annotation(ann_dir)?;
    let mesh = export_mesh(&ann, &ann.camera);
    save_mesh(out, &mesh)?;
    Ok(mesh.faces.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossReport {
    pub assignment: Vec<(usize, usize)>,
    pub losses: LossBreakdown,
}

/// Matches a prediction dump to an annotation and computes every loss term.
///
/// Pixel-depth supervision comes from `gt_depth` when given, else from the annotation's
/// planar depth.
pub fn loss_check(
    prediction: &Path,
    ann_dir: &Path,
    exemplars: &ExemplarSet,
    gt_depth: Option<&DepthMap>,
    weights: &LossWeights,
) -> Result<LossReport> {
    let preds: PredictionSet = load_json(prediction)?;
    let ann = load_annotation(ann_dir)?;
    let targets: Vec<_> = ann
        .planes
        .iter()
        .map(|p| encode_plane(&p.plane, exemplars))
        .collect();
    let planar = ann.planar_depth();
    let depth = gt_depth.unwrap_or(&planar);
    let normals = ann.normal_map();
    let cost = matching_cost(&preds, &ann, weights)?;
    let assignment = hungarian(&cost)?;
    let losses = compute_losses(
        &preds,
        LossInputs {
            annotation: &ann,
            targets: &targets,
            pixel_depth: depth,
            pixel_normals: &normals,
        },
        &assignment,
        weights,
    )?;
    Ok(LossReport { assignment, losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::new(120.0, 120.0, 80.0, 60.0, 160, 120).unwrap()
    }

    #[test]
    fn synth_annotate_evaluate() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("data");
        let k = camera();
        let spec = SceneSpec {
            plane_count: 4,
            seed: 100,
            ..SceneSpec::default()
        };
        let names = synth_dataset(&root, &k, &spec, 3).unwrap();
        assert_eq!(names, vec!["00000", "00001", "00002"]);
        let out = dir.path().join("ann");
        let summary =
            annotate_dataset(&root, &out, &k, &PipelineConfig::default(), &DepthEncoding::default()).unwrap();
        assert!(summary.iter().all(|s| s.planes == 4));
        let report = evaluate_annotations(&out, &root.join(GT_DIR), Some(&k), &RecallSpec::indoor()).unwrap();
        assert_eq!(report.images, 3);
        assert_eq!(report.depth_recall.as_deref(), Some(&[1.0, 1.0, 1.0][..]));
        assert_eq!(report.normal_recall.as_deref(), Some(&[1.0, 1.0, 1.0][..]));
    }

    #[test]
    fn identical_dirs_evaluate_perfectly() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("data");
        synth_dataset(&root, &camera(), &SceneSpec::default(), 2).unwrap();
        let gt = root.join(GT_DIR);
        let r = evaluate_annotations(&gt, &gt, None, &RecallSpec::outdoor()).unwrap();
        assert_eq!((r.rand_index, r.voi, r.seg_covering), (1.0, 0.0, 1.0));
        assert_eq!(r.depth_recall.unwrap(), vec![1.0; 3]);
    }

    #[test]
    fn cluster_encode_and_render() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("data");
        synth_dataset(&root, &camera(), &SceneSpec::default(), 4).unwrap();
        let gt = root.join(GT_DIR);
        let opts = ClusterOptions {
            normal_count: 3,
            per_group: 4,
            ..ClusterOptions::default()
        };
        let (ex, warnings) = cluster_annotations(&gt, &opts).unwrap();
        assert_eq!(ex.normals().len(), 3);
        assert_eq!(ex.offsets().len(), 4);
        // Synthetic offsets are all below the split, so the far group is empty.
        assert_eq!(warnings.len(), 1);
        let encoded = encode_annotations(&gt, &ex).unwrap();
        assert_eq!(encoded.len(), 4);
        assert!(encoded.iter().all(|e| e.targets.len() == 5));

        let depth_out = dir.path().join("d.f32");
        let depth = render_depth_file(&gt.join("00000"), &depth_out, &DepthEncoding::default()).unwrap();
        assert_eq!(depth.valid_count(), 160 * 120);
        let faces = export_mesh_file(&gt.join("00000"), &dir.path().join("m.ply")).unwrap();
        assert!(faces > 0);
    }

    #[test]
    fn zero_jobs_is_rejected() {
        assert!(matches!(with_pool(0, || ()), Err(Error::Config(_))));
        assert_eq!(with_pool(2, || 5).unwrap(), 5);
    }
}
