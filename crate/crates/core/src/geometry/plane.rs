use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::camera::CameraIntrinsics;
use super::raster::{DepthMap, PixelMask};
use crate::error::{Error, Result};

/// Smallest `nᵀK⁻¹q` for which a ray is considered to hit a plane.
pub const RAY_EPSILON: f64 = 1e-6;

/// Offsets at or below this magnitude describe planes through the camera center.
pub const MIN_PLANE_OFFSET: f64 = 1e-12;

/// A plane `nᵀX = d` in camera coordinates, stored canonically: `‖n‖ = 1`, `d > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    normal: Vector3<f64>,
    offset: f64,
}

impl Plane {
    /// Normalizes `normal` and flips the pair so the offset is positive.
    pub fn new(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if !norm.is_finite() || norm == 0.0 || !offset.is_finite() {
            return Err(Error::DegenerateSample(format!(
                "invalid plane parameters n={normal:?}, d={offset}"
            )));
        }
        let (n, d) = (normal / norm, offset / norm);
        if d.abs() <= MIN_PLANE_OFFSET {
            return Err(Error::DegenerateSample(
                "plane passes through the camera center".into(),
            ));
        }
        if d < 0.0 {
            Ok(Plane {
                normal: -n,
                offset: -d,
            })
        } else {
            Ok(Plane {
                normal: n,
                offset: d,
            })
        }
    }

    /// Takes already canonical parameters verbatim (no renormalization), so stored planes
    /// reload bit-for-bit. The normal must be unit within `1e-6` and the offset positive.
    pub fn from_canonical(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if !(norm - 1.0).abs().le(&1e-6) {
            return Err(Error::Domain(format!(
                "normal {normal:?} is not unit length (norm {norm})"
            )));
        }
        if !(offset.is_finite() && offset > MIN_PLANE_OFFSET) {
            return Err(Error::Domain(format!("offset {offset} is not positive")));
        }
        Ok(Plane { normal, offset })
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Orthogonal distance from `p` to the plane.
    #[inline]
    pub fn distance(&self, p: &Vector3<f64>) -> f64 {
        (self.normal.dot(p) - self.offset).abs()
    }

    /// Planar depth at pixel `(u, v)`: `d / (nᵀK⁻¹q)`, or `None` when the ray misses.
    #[inline]
    pub fn depth_at(&self, k: &CameraIntrinsics, u: f64, v: f64) -> Option<f64> {
        let denom = self.normal.dot(&k.ray(u, v));
        if denom > RAY_EPSILON {
            Some(self.offset / denom)
        } else {
            None
        }
    }

    /// Angle between the two unit normals, in radians.
    pub fn angle_to(&self, other: &Plane) -> f64 {
        angle_between(&self.normal, &other.normal)
    }
}

/// Numerically stable angle between two vectors (radians).
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Camera-frame points with the pixel each one came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub source_pixels: Vec<(u32, u32)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, point: Vector3<f64>, pixel: (u32, u32)) {
        self.points.push(point);
        self.source_pixels.push(pixel);
    }

    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            source_pixels: indices.iter().map(|&i| self.source_pixels[i]).collect(),
        }
    }

    pub fn mean_depth(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.points.iter().map(|p| p.z).sum::<f64>() / self.len() as f64
    }
}

/// Lifts valid depth pixels (restricted to `mask` if given) to `z·K⁻¹(u, v, 1)`.
pub fn backproject(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    mask: Option<&PixelMask>,
) -> Result<PointCloud> {
    if depth.width() != k.width || depth.height() != k.height {
        return Err(Error::Config(format!(
            "depth map is {}x{} but camera is {}x{}",
            depth.width(),
            depth.height(),
            k.width,
            k.height
        )));
    }
    let mut cloud = PointCloud::default();
    let mut lift = |idx: usize| {
        if let Some(z) = depth.get_index(idx) {
            let (u, v) = (idx % k.width, idx / k.width);
            cloud.push(k.ray(u as f64, v as f64) * z, (u as u32, v as u32));
        }
    };
    match mask {
        Some(mask) => {
            if mask.width() != k.width || mask.height() != k.height {
                return Err(Error::Config("mask size does not match camera".into()));
            }
            mask.indices().iter().for_each(|&i| lift(i as usize));
        }
        None => (0..k.pixel_count()).for_each(&mut lift),
    }
    Ok(cloud)
}

/// Renders the plane's depth over `mask`. Pixels whose ray is parallel to or facing away
/// from the plane (`nᵀK⁻¹q ≤ RAY_EPSILON`) stay invalid, as do pixels outside the mask.
pub fn render_planar_depth(plane: &Plane, mask: &PixelMask, k: &CameraIntrinsics) -> DepthMap {
    let mut out = DepthMap::invalid(k.width, k.height);
    for &idx in mask.indices() {
        let idx = idx as usize;
        let (u, v) = (idx % k.width, idx / k.width);
        if let Some(z) = plane.depth_at(k, u as f64, v as f64) {
            out.set_index(idx, z);
        }
    }
    out
}

pub fn plane_from_three_points(
    p0: &Vector3<f64>,
    p1: &Vector3<f64>,
    p2: &Vector3<f64>,
) -> Result<Plane> {
    let n = (p1 - p0).cross(&(p2 - p0));
    let norm = n.norm();
    if norm.is_nan() || norm < 1e-12 {
        return Err(Error::DegenerateSample(
            "collinear or coincident sample points".into(),
        ));
    }
    let n = n / norm;
    Plane::new(n, n.dot(p0))
}

/// Total least squares plane: centroid plus the eigenvector of the smallest scatter
/// eigenvalue.
pub fn fit_plane_lsq(points: &[Vector3<f64>]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::DegenerateSample(format!(
            "need at least 3 points to fit a plane, got {}",
            points.len()
        )));
    }
    let count = points.len() as f64;
    let centroid = points.iter().fold(Vector3::zeros(), |acc, p| acc + p) / count;
    let mut scatter = Matrix3::<f64>::zeros();
    for p in points {
        let c = p - centroid;
        scatter += c * c.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let (smallest, middle, largest) = (
        order[0],
        eig.eigenvalues[order[1]],
        eig.eigenvalues[order[2]],
    );
    if largest.is_nan() || largest <= 0.0 || middle <= 1e-12 * largest {
        return Err(Error::DegenerateSample(
            "point scatter is rank deficient (collinear or coincident points)".into(),
        ));
    }
    let n = eig.eigenvectors.column(smallest).into_owned();
    Plane::new(n, n.dot(&centroid))
}

pub fn point_plane_residuals(plane: &Plane, points: &[Vector3<f64>]) -> Vec<f64> {
    points.iter().map(|p| plane.distance(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn vga() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480).unwrap()
    }

    fn assert_plane_close(a: &Plane, b: &Plane, tol: f64) {
        assert!(a.angle_to(b) < tol, "angle {} between {a:?} and {b:?}", a.angle_to(b));
        assert!((a.offset() - b.offset()).abs() < tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn principal_ray_backprojects_onto_axis() {
        let k = vga();
        let mut depth = DepthMap::invalid(640, 480);
        depth.set(320, 240, 2.0);
        let cloud = backproject(&depth, &k, None).unwrap();
        assert_eq!(cloud.points, vec![Vector3::new(0.0, 0.0, 2.0)]);
        assert_eq!(cloud.source_pixels, vec![(320, 240)]);
    }

    #[test]
    fn unit_intrinsics_backprojection() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0, 2, 2).unwrap();
        let mut depth = DepthMap::invalid(2, 2);
        depth.set(1, 1, 1.0);
        let cloud = backproject(&depth, &k, None).unwrap();
        assert_eq!(cloud.points, vec![Vector3::new(1.0, 1.0, 1.0)]);
    }

    #[test]
    fn all_invalid_depth_gives_empty_cloud() {
        let k = vga();
        let cloud = backproject(&DepthMap::invalid(640, 480), &k, None).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn backproject_rejects_size_mismatch() {
        let err = backproject(&DepthMap::invalid(10, 10), &vga(), None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn fronto_parallel_plane_renders_constant_depth() {
        let k = vga();
        let plane = Plane::new(Vector3::z(), 2.0).unwrap();
        let mask = PixelMask::full(640, 480);
        let depth = render_planar_depth(&plane, &mask, &k);
        assert_eq!(depth.valid_count(), 640 * 480);
        assert!(depth.values().iter().all(|&z| z == 2.0));
    }

    #[test]
    fn parallel_ray_is_invalid() {
        let k = vga();
        let plane = Plane::new(Vector3::x(), 1.0).unwrap();
        let mask = PixelMask::from_pixels(640, 480, [(320, 240)]).unwrap();
        let depth = render_planar_depth(&plane, &mask, &k);
        assert_eq!(depth.get(320, 240), None);
    }

    #[test]
    fn tilted_plane_depth_matches_hand_value() {
        // 1 / (0.5 * (100/500) + cos30 * 1), evaluated independently.
        let expected = 1.0 / (0.5 * 0.2 + 0.866_025_403_784_438_6);
        let k = vga();
        let (s, c) = 30f64.to_radians().sin_cos();
        let plane = Plane::new(Vector3::new(0.0, s, c), 1.0).unwrap();
        let mask = PixelMask::from_pixels(640, 480, [(320, 340)]).unwrap();
        let depth = render_planar_depth(&plane, &mask, &k);
        let z = depth.get(320, 340).unwrap();
        assert!((z - expected).abs() < 1e-12, "{z} vs {expected}");
        assert!((z - 1.035_169_464_573_565_6).abs() < 1e-12);
    }

    #[test]
    fn three_point_planes() {
        let p = plane_from_three_points(
            &Vector3::new(0.0, 0.0, 1.0),
            &Vector3::new(1.0, 0.0, 1.0),
            &Vector3::new(0.0, 1.0, 1.0),
        )
        .unwrap();
        assert_eq!(p.normal(), Vector3::z());
        assert_eq!(p.offset(), 1.0);

        let err = plane_from_three_points(
            &Vector3::new(0.0, 0.0, 1.0),
            &Vector3::new(1.0, 0.0, 1.0),
            &Vector3::new(2.0, 0.0, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateSample(_)));

        // x + y + z = 1 solved by hand: n = (1,1,1)/√3, d = 1/√3.
        let p = plane_from_three_points(&Vector3::x(), &Vector3::y(), &Vector3::z()).unwrap();
        let inv_sqrt3 = 1.0 / 3f64.sqrt();
        assert!((p.normal() - Vector3::repeat(inv_sqrt3)).norm() < 1e-12);
        assert!((p.offset() - inv_sqrt3).abs() < 1e-12);
    }

    #[test]
    fn lsq_recovers_exact_plane() {
        let points: Vec<_> = (0..100)
            .map(|i| Vector3::new((i % 10) as f64 * 0.1, (i / 10) as f64 * 0.1, 1.0))
            .collect();
        let p = fit_plane_lsq(&points).unwrap();
        assert!((p.normal() - Vector3::z()).norm() < 1e-9);
        assert!((p.offset() - 1.0).abs() < 1e-9);
        assert!(fit_plane_lsq(&points[..2]).is_err());
    }

    #[test]
    fn lsq_rejects_collinear() {
        let points: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, 0.0, 1.0)).collect();
        assert!(matches!(
            fit_plane_lsq(&points),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn lsq_tolerates_small_noise() {
        let truth = Plane::new(Vector3::new(0.2, -0.3, 1.0), 3.0).unwrap();
        let n = truth.normal();
        let t1 = n.cross(&Vector3::x()).normalize();
        let t2 = n.cross(&t1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.001).unwrap();
        let points: Vec<_> = (0..500)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                n * (truth.offset() + noise.sample(&mut rng)) + t1 * a + t2 * b
            })
            .collect();
        let fit = fit_plane_lsq(&points).unwrap();
        assert_plane_close(&fit, &truth, 1e-2);
    }

    #[test]
    fn residuals_are_orthogonal_distances() {
        let plane = Plane::new(Vector3::z(), 1.0).unwrap();
        let pts = [Vector3::new(0.0, 0.0, 3.0), Vector3::new(5.0, -2.0, 1.0)];
        assert_eq!(point_plane_residuals(&plane, &pts), vec![2.0, 0.0]);
    }

    #[test]
    fn canonicalization_is_idempotent_under_flip() {
        let n = Vector3::new(0.3, -0.4, 0.8);
        let a = Plane::new(n, 2.5).unwrap();
        let b = Plane::new(-n, -2.5).unwrap();
        assert_eq!(a, b);
        assert!(a.offset() > 0.0);
        assert!(Plane::new(n, 0.0).is_err());
    }
}
