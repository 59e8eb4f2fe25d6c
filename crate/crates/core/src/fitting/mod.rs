//! Dense plane annotation from a depth map and an instance segmentation.
//!
//! Every segment is lifted to a point cloud and planes are extracted one after another
//! with RANSAC, using an inlier threshold that grows with the proposal's mean depth.
//! Proposals of the same segment that touch and agree in orientation and offset are
//! merged, and tiny planes are dropped at the end.

mod config;
mod merge;
mod ransac;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{CategoryRangeTable, FittingConfig, PlaneRange, ThresholdStage};
pub use merge::merge_close_planes;
pub use ransac::{
    adaptive_threshold, fit_instance, ransac_single, InstanceFit, InstanceInfo, RansacFit,
};

use crate::error::{Error, Result};
use crate::geometry::{
    backproject, CameraIntrinsics, DepthMap, InstanceSegmentation, NormalMap, PixelMask, Plane,
};

/// One annotated plane and the statistics of the fit that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneInstance {
    pub plane: Plane,
    pub mask: PixelMask,
    pub inlier_count: usize,
    /// Mean point-to-plane distance over the inliers (meters).
    pub mean_fit_error: f64,
    /// Mean depth of the inliers (meters).
    pub mean_depth: f64,
    pub instance_id: u32,
    pub semantic_class: String,
}

/// Per-image set of planes with pairwise disjoint masks. Pixels outside every mask are
/// non-planar.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneAnnotation {
    pub camera: CameraIntrinsics,
    pub planes: Vec<PlaneInstance>,
}

impl PlaneAnnotation {
    pub fn empty(camera: CameraIntrinsics) -> Self {
        PlaneAnnotation {
            camera,
            planes: Vec::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.camera.width
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    /// Row-major raster with `0` for non-planar pixels and `k` for plane `k - 1`.
    pub fn label_raster(&self) -> Vec<u32> {
        let mut labels = vec![0u32; self.camera.pixel_count()];
        for (k, p) in self.planes.iter().enumerate() {
            for &i in p.mask.indices() {
                labels[i as usize] = k as u32 + 1;
            }
        }
        labels
    }

    /// Planar depth of every plane over its own mask.
    pub fn planar_depth(&self) -> DepthMap {
        let mut depth = DepthMap::invalid(self.width(), self.height());
        for p in &self.planes {
            for (u, v) in p.mask.pixels() {
                if let Some(z) = p.plane.depth_at(&self.camera, u as f64, v as f64) {
                    depth.set(u, v, z);
                }
            }
        }
        depth
    }

    /// Plane normal of every annotated pixel.
    pub fn normal_map(&self) -> NormalMap {
        let mut normals = NormalMap::invalid(self.width(), self.height());
        for p in &self.planes {
            for &i in p.mask.indices() {
                normals.set_index(i as usize, p.plane.normal());
            }
        }
        normals
    }

    /// Union of all plane masks.
    pub fn planar_mask(&self) -> PixelMask {
        let labels = self.label_raster();
        PixelMask::from_predicate(self.width(), self.height(), |u, v| {
            labels[v * self.width() + u] > 0
        })
    }
}

/// Per-instance RNG: one ChaCha stream per instance id, so results do not depend on the
/// order in which instances are processed.
pub fn instance_rng(seed: u64, instance_id: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(instance_id as u64);
    rng
}

/// Full annotation pipeline for one image. Instances are fitted in parallel on the
/// current rayon pool; output is identical for any pool size.
pub fn annotate_image(
    depth: &DepthMap,
    segmentation: &InstanceSegmentation,
    k: &CameraIntrinsics,
    ranges: &CategoryRangeTable,
    cfg: &FittingConfig,
) -> Result<PlaneAnnotation> {
    cfg.validate()?;
    ranges.validate()?;
    k.validate()?;
    let dims = (k.width, k.height);
    if (depth.width(), depth.height()) != dims
        || (segmentation.width, segmentation.height) != dims
    {
        return Err(Error::Config(format!(
            "raster sizes differ: depth {}x{}, segmentation {}x{}, camera {}x{}",
            depth.width(),
            depth.height(),
            segmentation.width,
            segmentation.height,
            k.width,
            k.height
        )));
    }

    let jobs: Vec<(u32, PixelMask)> = segmentation
        .instance_masks()
        .into_iter()
        .filter(|(id, mask)| {
            // Skips instances below `min_plane_pixels` and classes with `max == 0`.
            mask.len() >= cfg.min_plane_pixels
                && ranges.range_for(segmentation.class_of(*id)).max > 0
        })
        .collect();

    let fits: Vec<Result<InstanceFit>> = jobs
        .par_iter()
        .map(|(id, mask)| {
            let class = segmentation.class_of(*id);
            let range = ranges.range_for(class);
            let cloud = backproject(depth, k, Some(mask))?;
            if cloud.len() < 3 {
                return Ok(InstanceFit {
                    planes: Vec::new(),
                    reached_min: range.min == 0,
                });
            }
            let mut rng = instance_rng(cfg.seed, *id);
            let info = InstanceInfo {
                instance_id: *id,
                semantic_class: class,
                width: k.width,
                height: k.height,
            };
            fit_instance(&cloud, range, cfg, &mut rng, info)
        })
        .collect();

    let mut planes = Vec::new();
    for ((id, _), fit) in jobs.iter().zip(fits) {
        let fit = fit?;
        if !fit.reached_min {
            log::warn!(
                "instance {id} ({}): found {} planes, expected at least {}",
                segmentation.class_of(*id),
                fit.planes.len(),
                ranges.range_for(segmentation.class_of(*id)).min
            );
        }
        planes.extend(fit.planes);
    }

    let mut planes = merge_close_planes(planes, depth, k, cfg)?;
    planes.retain(|p| p.mask.len() >= cfg.min_plane_pixels);
    Ok(PlaneAnnotation { camera: *k, planes })
}
