//! Seeded synthetic planar scenes with exact ground truth.
//!
//! The image is split into convex cells (nearest-site partition of well-spaced random
//! sites). Each cell gets a random plane whose depth over the whole cell stays inside
//! `depth_range`, and the rendered depth is optionally perturbed by multiplicative
//! Gaussian noise.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::camera::CameraIntrinsics;
use super::plane::{Plane, RAY_EPSILON};
use super::raster::{DepthMap, InstanceSegmentation, PixelMask};
use crate::error::{Error, Result};
use crate::fitting::{PlaneAnnotation, PlaneInstance};

const PLACEMENT_ATTEMPTS: usize = 500;

/// Class label given to every synthetic region.
pub const SYNTH_CLASS: &str = "wall";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub plane_count: usize,
    /// `(min, max)` depth in meters that every rendered pixel must respect.
    pub depth_range: (f64, f64),
    /// Standard deviation of the multiplicative depth noise.
    pub noise_sigma: f64,
    pub seed: u64,
    /// Maximum angle between a plane normal and the optical axis. `0` forces
    /// fronto-parallel planes.
    pub max_tilt_deg: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            plane_count: 5,
            depth_range: (1.0, 6.0),
            noise_sigma: 0.0,
            seed: 0,
            max_tilt_deg: 50.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(1..=64).contains(&self.plane_count) {
            return Err(Error::Config(format!(
                "plane_count must be in 1..=64, got {}",
                self.plane_count
            )));
        }
        let (lo, hi) = self.depth_range;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Config(format!(
                "depth range must satisfy 0 < min < max, got ({lo}, {hi})"
            )));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be >= 0".into()));
        }
        if !(0.0..90.0).contains(&self.max_tilt_deg) {
            return Err(Error::Config("max_tilt_deg must be in [0, 90)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub camera: CameraIntrinsics,
    pub depth: DepthMap,
    pub segmentation: InstanceSegmentation,
    /// `(instance id, plane)` in ascending id order.
    pub planes: Vec<(u32, Plane)>,
    pub regions: Vec<PixelMask>,
}

impl SyntheticScene {
    /// The generator's planes as an annotation: one plane per region, exact parameters.
    pub fn ground_truth(&self) -> PlaneAnnotation {
        let planes = self
            .planes
            .iter()
            .zip(&self.regions)
            .map(|(&(id, plane), mask)| {
                let mean_depth = mask
                    .pixels()
                    .filter_map(|(u, v)| plane.depth_at(&self.camera, u as f64, v as f64))
                    .sum::<f64>()
                    / mask.len() as f64;
                PlaneInstance {
                    plane,
                    mask: mask.clone(),
                    inlier_count: mask.len(),
                    mean_fit_error: 0.0,
                    mean_depth,
                    instance_id: id,
                    semantic_class: SYNTH_CLASS.to_string(),
                }
            })
            .collect();
        PlaneAnnotation {
            camera: self.camera,
            planes,
        }
    }
}

pub fn synth_scene(spec: &SceneSpec, k: &CameraIntrinsics) -> Result<SyntheticScene> {
    spec.validate()?;
    k.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sites = place_sites(spec.plane_count, k, &mut rng);

    let (w, h) = (k.width, k.height);
    let mut ids = vec![0u32; w * h];
    let mut region_pixels = vec![Vec::new(); sites.len()];
    for v in 0..h {
        for u in 0..w {
            let (px, py) = (u as f64, v as f64);
            let nearest = sites
                .iter()
                .enumerate()
                .map(|(i, &(sx, sy))| (i, (sx - px).powi(2) + (sy - py).powi(2)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .expect("at least one site");
            ids[v * w + u] = nearest as u32 + 1;
            region_pixels[nearest].push((v * w + u) as u32);
        }
    }

    let mut depth = DepthMap::invalid(w, h);
    let mut planes = Vec::with_capacity(sites.len());
    let mut regions = Vec::with_capacity(sites.len());
    for (i, pixels) in region_pixels.into_iter().enumerate() {
        let mask = PixelMask::from_indices(w, h, pixels)?;
        if mask.is_empty() {
            return Err(Error::Generation(format!("region {} is empty", i + 1)));
        }
        let plane = place_plane(&mask, sites[i], spec, k, &mut rng).ok_or_else(|| {
            Error::Generation(format!(
                "no plane fits region {} within depth range {:?} after {PLACEMENT_ATTEMPTS} attempts",
                i + 1,
                spec.depth_range
            ))
        })?;
        for &idx in mask.indices() {
            let idx = idx as usize;
            let z = plane
                .depth_at(k, (idx % w) as f64, (idx / w) as f64)
                .expect("placement checked every ray");
            depth.set_index(idx, z);
        }
        planes.push((i as u32 + 1, plane));
        regions.push(mask);
    }

    if spec.noise_sigma > 0.0 {
        for idx in 0..w * h {
            let z = depth.get_index(idx).expect("every pixel is covered");
            let e: f64 = StandardNormal.sample(&mut rng);
            depth.set_index(idx, z * (1.0 + spec.noise_sigma * e));
        }
    }

    let classes: BTreeMap<u32, String> = planes
        .iter()
        .map(|&(id, _)| (id, SYNTH_CLASS.to_string()))
        .collect();
    Ok(SyntheticScene {
        camera: *k,
        depth,
        segmentation: InstanceSegmentation::new(w, h, ids, classes)?,
        planes,
        regions,
    })
}

/// Random sites at least `spacing` apart; the spacing shrinks after repeated rejections.
fn place_sites(count: usize, k: &CameraIntrinsics, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let (w, h) = (k.width as f64, k.height as f64);
    let mut spacing = 0.6 * (w * h / count as f64).sqrt();
    let mut sites: Vec<(f64, f64)> = Vec::with_capacity(count);
    let mut rejected = 0;
    while sites.len() < count {
        let candidate = (rng.random_range(0.0..w), rng.random_range(0.0..h));
        let clear = sites
            .iter()
            .all(|s| (s.0 - candidate.0).hypot(s.1 - candidate.1) >= spacing);
        if clear {
            sites.push(candidate);
        } else {
            rejected += 1;
            if rejected % 200 == 0 {
                spacing *= 0.9;
            }
        }
    }
    sites
}

fn place_plane(
    mask: &PixelMask,
    site: (f64, f64),
    spec: &SceneSpec,
    k: &CameraIntrinsics,
    rng: &mut ChaCha8Rng,
) -> Option<Plane> {
    let (lo, hi) = spec.depth_range;
    let max_tilt = spec.max_tilt_deg.to_radians();
    let anchor_ray = k.ray(site.0, site.1);
    for attempt in 0..PLACEMENT_ATTEMPTS {
        // Later attempts draw from a shrinking tilt range.
        let shrink = 1.0 - attempt as f64 / PLACEMENT_ATTEMPTS as f64;
        let tilt = rng.random_range(0.0..=1.0) * max_tilt * shrink;
        let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
        let normal = Vector3::new(
            tilt.sin() * azimuth.cos(),
            tilt.sin() * azimuth.sin(),
            tilt.cos(),
        );
        let anchor_depth = rng.random_range(lo..=hi);
        let Ok(plane) = Plane::new(normal, anchor_depth * normal.dot(&anchor_ray)) else {
            continue;
        };
        let fits = mask.pixels().all(|(u, v)| {
            let denom = normal.dot(&k.ray(u as f64, v as f64));
            denom > RAY_EPSILON && {
                let z = plane.offset() / denom;
                (lo..=hi).contains(&z)
            }
        });
        if fits {
            return Some(plane);
        }
    }
    None
}
