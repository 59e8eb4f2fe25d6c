use rand::seq::index::sample;
use rand::Rng;

use super::config::{FittingConfig, PlaneRange, ThresholdStage};
use super::PlaneInstance;
use crate::error::{Error, Result};
use crate::geometry::{fit_plane_lsq, plane_from_three_points, PixelMask, Plane, PointCloud};

/// Distance-aware fitting error bound `E = max(e_ref · d_m / d_ref, e_ref)`.
pub fn adaptive_threshold(mean_depth: f64, cfg: &FittingConfig) -> Result<f64> {
    if !(mean_depth > 0.0 && mean_depth.is_finite()) {
        return Err(Error::Domain(format!(
            "mean depth must be positive, got {mean_depth}"
        )));
    }
    Ok(threshold(mean_depth, cfg))
}

#[inline]
fn threshold(mean_depth: f64, cfg: &FittingConfig) -> f64 {
    (cfg.reference_error * mean_depth / cfg.reference_depth).max(cfg.reference_error)
}

/// A plane proposal accepted by RANSAC.
#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    /// Least-squares refit on the inliers.
    pub plane: Plane,
    /// Indices into the input cloud, ascending.
    pub inliers: Vec<usize>,
    pub mean_fit_error: f64,
    pub mean_depth: f64,
}

pub(crate) fn min_inliers(point_count: usize, cfg: &FittingConfig) -> usize {
    let ratio_floor = (cfg.min_inlier_ratio * point_count as f64).ceil() as usize;
    ratio_floor.max(3)
}

/// One round of plane extraction: `ransac_iterations` three-point hypotheses, the one
/// with most inliers is refit by least squares. Returns `None` when the best inlier set
/// is below `max(3, min_inlier_ratio · |points|)` or the refit's mean error exceeds its
/// distance-aware threshold.
pub fn ransac_single<R: Rng + ?Sized>(
    points: &PointCloud,
    cfg: &FittingConfig,
    rng: &mut R,
) -> Result<Option<RansacFit>> {
    ransac_with_floor(points, cfg, rng, min_inliers(points.len(), cfg))
}

pub(crate) fn ransac_with_floor<R: Rng + ?Sized>(
    cloud: &PointCloud,
    cfg: &FittingConfig,
    rng: &mut R,
    floor: usize,
) -> Result<Option<RansacFit>> {
    let points = &cloud.points;
    if points.len() < 3 {
        return Err(Error::DegenerateSample(format!(
            "RANSAC needs at least 3 points, got {}",
            points.len()
        )));
    }
    let fixed_threshold = match cfg.threshold_stage {
        ThresholdStage::FinalOnly => Some(threshold(cloud.mean_depth(), cfg)),
        ThresholdStage::ScoringAndFinal => None,
    };

    let mut best: Option<(Plane, f64, usize)> = None;
    for _ in 0..cfg.ransac_iterations {
        let picked = sample(rng, points.len(), 3);
        let (a, b, c) = (picked.index(0), picked.index(1), picked.index(2));
        let Ok(hypothesis) = plane_from_three_points(&points[a], &points[b], &points[c]) else {
            continue;
        };
        let inlier_threshold = match fixed_threshold {
            Some(t) => t,
            None => {
                // Seed with the sample's own depth, then settle on the candidate inliers'.
                let seed = threshold((points[a].z + points[b].z + points[c].z) / 3.0, cfg);
                let (mut count, mut depth_sum) = (0usize, 0.0);
                for p in points {
                    if hypothesis.distance(p) < seed {
                        count += 1;
                        depth_sum += p.z;
                    }
                }
                if count == 0 {
                    continue;
                }
                threshold(depth_sum / count as f64, cfg)
            }
        };
        let count = points
            .iter()
            .filter(|p| hypothesis.distance(p) < inlier_threshold)
            .count();
        if best.is_none_or(|(_, _, n)| count > n) {
            best = Some((hypothesis, inlier_threshold, count));
        }
    }

    let Some((hypothesis, inlier_threshold, count)) = best else {
        return Ok(None);
    };
    if count < floor {
        return Ok(None);
    }
    let inliers: Vec<usize> = (0..points.len())
        .filter(|&i| hypothesis.distance(&points[i]) < inlier_threshold)
        .collect();
    let inlier_points: Vec<_> = inliers.iter().map(|&i| points[i]).collect();
    let plane = match fit_plane_lsq(&inlier_points) {
        Ok(p) => p,
        Err(Error::DegenerateSample(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let n = inlier_points.len() as f64;
    let mean_fit_error = inlier_points.iter().map(|p| plane.distance(p)).sum::<f64>() / n;
    let mean_depth = inlier_points.iter().map(|p| p.z).sum::<f64>() / n;
    if mean_fit_error > threshold(mean_depth, cfg) {
        return Ok(None);
    }
    Ok(Some(RansacFit {
        plane,
        inliers,
        mean_fit_error,
        mean_depth,
    }))
}

/// Identity of the segment being fitted.
#[derive(Debug, Clone, Copy)]
pub struct InstanceInfo<'a> {
    pub instance_id: u32,
    pub semantic_class: &'a str,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFit {
    pub planes: Vec<PlaneInstance>,
    /// False when fewer than `range.min` planes could be extracted.
    pub reached_min: bool,
}

/// Sequential extraction: run RANSAC, remove the inliers, repeat until `range.max` planes
/// were found or no further proposal is accepted.
pub fn fit_instance<R: Rng + ?Sized>(
    points: &PointCloud,
    range: PlaneRange,
    cfg: &FittingConfig,
    rng: &mut R,
    info: InstanceInfo<'_>,
) -> Result<InstanceFit> {
    let floor = min_inliers(points.len(), cfg);
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut planes = Vec::new();
    while planes.len() < range.max && remaining.len() >= 3 {
        let working = points.select(&remaining);
        let Some(fit) = ransac_with_floor(&working, cfg, rng, floor)? else {
            break;
        };
        let pixels = fit.inliers.iter().map(|&i| working.source_pixels[i]);
        let mask = PixelMask::from_pixels(info.width, info.height, pixels)?;
        planes.push(PlaneInstance {
            plane: fit.plane,
            inlier_count: fit.inliers.len(),
            mask,
            mean_fit_error: fit.mean_fit_error,
            mean_depth: fit.mean_depth,
            instance_id: info.instance_id,
            semantic_class: info.semantic_class.to_string(),
        });
        let mut taken = fit.inliers.into_iter().peekable();
        remaining = remaining
            .iter()
            .enumerate()
            .filter(|&(pos, _)| {
                if taken.peek() == Some(&pos) {
                    taken.next();
                    false
                } else {
                    true
                }
            })
            .map(|(_, &i)| i)
            .collect();
    }
    Ok(InstanceFit {
        reached_min: planes.len() >= range.min,
        planes,
    })
}
