use super::config::FittingConfig;
use super::ransac::adaptive_threshold;
use super::PlaneInstance;
use crate::error::{Error, Result};
use crate::geometry::{backproject, fit_plane_lsq, CameraIntrinsics, DepthMap};

fn parameters_close(a: &PlaneInstance, b: &PlaneInstance, cfg: &FittingConfig) -> bool {
    let angle = a.plane.angle_to(&b.plane).to_degrees();
    let (da, db) = (a.plane.offset(), b.plane.offset());
    angle < cfg.merge_angle_tol_deg && (da - db).abs() / da.max(db) < cfg.merge_offset_rel_tol
}

/// Refit of the union of two planes, or `None` if the union does not satisfy the
/// distance-aware fitting error bound.
fn try_merge(
    a: &PlaneInstance,
    b: &PlaneInstance,
    depth: &DepthMap,
    k: &CameraIntrinsics,
    cfg: &FittingConfig,
) -> Result<Option<PlaneInstance>> {
    let mask = a.mask.union(&b.mask);
    let cloud = backproject(depth, k, Some(&mask))?;
    let plane = match fit_plane_lsq(&cloud.points) {
        Ok(p) => p,
        Err(Error::DegenerateSample(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let n = cloud.len() as f64;
    let mean_fit_error = cloud.points.iter().map(|p| plane.distance(p)).sum::<f64>() / n;
    let mean_depth = cloud.mean_depth();
    if mean_fit_error > adaptive_threshold(mean_depth, cfg)? {
        return Ok(None);
    }
    Ok(Some(PlaneInstance {
        plane,
        mask,
        inlier_count: a.inlier_count + b.inlier_count,
        mean_fit_error,
        mean_depth,
        instance_id: a.instance_id,
        semantic_class: a.semantic_class.clone(),
    }))
}

/// Merges planes of the same segment instance whose masks touch (8-neighborhood) and
/// whose parameters are within the configured angle / relative offset tolerances.
///
/// Pairs are visited in ascending `(i, j)` order; the merged plane replaces `i` and `j`
/// is removed, then the scan restarts until no pair merges.
pub fn merge_close_planes(
    mut planes: Vec<PlaneInstance>,
    depth: &DepthMap,
    k: &CameraIntrinsics,
    cfg: &FittingConfig,
) -> Result<Vec<PlaneInstance>> {
    'scan: loop {
        for i in 0..planes.len() {
            for j in i + 1..planes.len() {
                let (a, b) = (&planes[i], &planes[j]);
                if a.instance_id != b.instance_id
                    || !parameters_close(a, b, cfg)
                    || !a.mask.touches(&b.mask)
                {
                    continue;
                }
                if let Some(merged) = try_merge(a, b, depth, k, cfg)? {
                    planes[i] = merged;
                    planes.remove(j);
                    continue 'scan;
                }
            }
        }
        return Ok(planes);
    }
}
