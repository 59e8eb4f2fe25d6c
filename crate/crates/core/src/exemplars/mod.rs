//! Normal and offset exemplars and the classification-then-regression plane code.
//!
//! A plane is represented by the index of its closest normal exemplar plus a residual
//! vector, and the index of its closest offset exemplar plus a residual scalar:
//!
//! ```text
//! n = n̂[i] + r_n      (renormalized to unit length)
//! d = d̂[j] + r_d
//! ```

mod kmeans;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub use kmeans::{kmeans, KMeansResult, DEFAULT_MAX_ITERS};

use crate::error::{Error, Result};
use crate::geometry::Plane;

pub const DEFAULT_NORMAL_EXEMPLARS: usize = 7;
pub const DEFAULT_OFFSET_SPLIT: f64 = 20.0;
pub const DEFAULT_OFFSETS_PER_GROUP: usize = 10;

/// Clusters unit normals and renormalizes the centers.
///
/// A center that collapses to (near) zero length, which happens when a cluster holds
/// antipodal normals, is replaced by the input normal farthest from the other centers.
pub fn build_normal_exemplars(
    normals: &[Vector3<f64>],
    k: usize,
    seed: u64,
) -> Result<Vec<Vector3<f64>>> {
    let data: Vec<[f64; 3]> = normals.iter().map(|n| [n.x, n.y, n.z]).collect();
    let result = kmeans(&data, k, seed, DEFAULT_MAX_ITERS)?;
    let mut centers: Vec<Option<Vector3<f64>>> = result
        .centers
        .iter()
        .map(|c| {
            let v = Vector3::new(c[0], c[1], c[2]);
            let norm = v.norm();
            (norm > 1e-9).then(|| v / norm)
        })
        .collect();
    for c in 0..centers.len() {
        if centers[c].is_some() {
            continue;
        }
        let replacement = normals
            .iter()
            .map(|n| {
                let closest = centers
                    .iter()
                    .flatten()
                    .map(|e| e.dot(n))
                    .fold(f64::NEG_INFINITY, f64::max);
                (n, closest)
            })
            .fold((None, f64::INFINITY), |best, (n, closest)| {
                if closest < best.1 {
                    (Some(n), closest)
                } else {
                    best
                }
            })
            .0
            .expect("at least k normals");
        centers[c] = Some(replacement.normalize());
    }
    Ok(centers.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetExemplars {
    /// Strictly ascending.
    pub values: Vec<f64>,
    /// Number of input offsets `<= split` and `> split`.
    pub group_counts: [usize; 2],
    pub warnings: Vec<String>,
}

/// Splits offsets at `split` meters and clusters each side into `per_group` 1-D exemplars.
///
/// A group with fewer than `per_group` members contributes one exemplar per member (so an
/// empty group contributes none) and records a warning.
pub fn build_offset_exemplars(
    offsets: &[f64],
    split: f64,
    per_group: usize,
    seed: u64,
) -> Result<OffsetExemplars> {
    if offsets.is_empty() {
        return Err(Error::Domain("no offsets to cluster".into()));
    }
    if let Some(bad) = offsets.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::Domain(format!("offsets must be positive, got {bad}")));
    }
    let near: Vec<[f64; 1]> = offsets.iter().filter(|&&d| d <= split).map(|&d| [d]).collect();
    let far: Vec<[f64; 1]> = offsets.iter().filter(|&&d| d > split).map(|&d| [d]).collect();
    let mut values = Vec::new();
    let mut warnings = Vec::new();
    for (group, (name, members)) in [("near", &near), ("far", &far)].into_iter().enumerate() {
        let k = members.len().min(per_group);
        if members.len() < per_group {
            warnings.push(format!(
                "{name} offset group has {} planes, fewer than {per_group} exemplars requested",
                members.len()
            ));
        }
        if k == 0 {
            continue;
        }
        let result = kmeans(members, k, seed ^ group as u64, DEFAULT_MAX_ITERS)?;
        values.extend(result.centers.iter().map(|c| c[0]));
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(OffsetExemplars {
        values,
        group_counts: [near.len(), far.len()],
        warnings,
    })
}

/// Normal and offset exemplars shared by the encoder and decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExemplarFile", into = "ExemplarFile")]
pub struct ExemplarSet {
    normals: Vec<Vector3<f64>>,
    offsets: Vec<f64>,
    split_threshold: f64,
    seed: u64,
    group_counts: [usize; 2],
}

/// On-disk JSON layout of an [`ExemplarSet`].
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ExemplarFile {
    normals: Vec<[f64; 3]>,
    offsets: Vec<f64>,
    split_threshold: f64,
    seed: u64,
    #[serde(default)]
    group_counts: [usize; 2],
}

impl TryFrom<ExemplarFile> for ExemplarSet {
    type Error = Error;

    fn try_from(f: ExemplarFile) -> Result<Self> {
        ExemplarSet::new(
            f.normals.iter().map(|n| Vector3::from(*n)).collect(),
            f.offsets,
            f.split_threshold,
            f.seed,
            f.group_counts,
        )
    }
}

impl From<ExemplarSet> for ExemplarFile {
    fn from(e: ExemplarSet) -> Self {
        ExemplarFile {
            normals: e.normals.iter().map(|n| [n.x, n.y, n.z]).collect(),
            offsets: e.offsets,
            split_threshold: e.split_threshold,
            seed: e.seed,
            group_counts: e.group_counts,
        }
    }
}

impl ExemplarSet {
    pub fn new(
        normals: Vec<Vector3<f64>>,
        offsets: Vec<f64>,
        split_threshold: f64,
        seed: u64,
        group_counts: [usize; 2],
    ) -> Result<Self> {
        if normals.is_empty() {
            return Err(Error::Config("need at least one normal exemplar".into()));
        }
        if let Some(n) = normals.iter().find(|n| (n.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::Config(format!("normal exemplar {n:?} is not unit length")));
        }
        if offsets.len() < 2 {
            return Err(Error::Config("need at least two offset exemplars".into()));
        }
        if offsets.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("offset exemplars must be positive".into()));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "offset exemplars must be strictly ascending".into(),
            ));
        }
        Ok(ExemplarSet {
            normals,
            offsets,
            split_threshold,
            seed,
            group_counts,
        })
    }

    /// Clusters the planes of a training corpus.
    pub fn from_planes(
        planes: &[Plane],
        normal_count: usize,
        split: f64,
        per_group: usize,
        seed: u64,
    ) -> Result<(Self, Vec<String>)> {
        let normals: Vec<_> = planes.iter().map(Plane::normal).collect();
        let offsets: Vec<_> = planes.iter().map(Plane::offset).collect();
        let normals = build_normal_exemplars(&normals, normal_count, seed)?;
        let offsets = build_offset_exemplars(&offsets, split, per_group, seed)?;
        let set = ExemplarSet::new(normals, offsets.values, split, seed, offsets.group_counts)?;
        Ok((set, offsets.warnings))
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn split_threshold(&self) -> f64 {
        self.split_threshold
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn group_counts(&self) -> [usize; 2] {
        self.group_counts
    }
}

/// Classification-then-regression target of one plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneTarget {
    pub normal_class: usize,
    pub normal_residual: Vector3<f64>,
    pub offset_class: usize,
    pub offset_residual: f64,
}

pub fn encode_plane(plane: &Plane, exemplars: &ExemplarSet) -> PlaneTarget {
    let n = plane.normal();
    let mut normal_class = 0;
    let mut best_dot = f64::NEG_INFINITY;
    for (i, e) in exemplars.normals.iter().enumerate() {
        let dot = e.dot(&n);
        if dot > best_dot {
            best_dot = dot;
            normal_class = i;
        }
    }
    let d = plane.offset();
    let mut offset_class = 0;
    let mut best_gap = f64::INFINITY;
    for (j, &e) in exemplars.offsets.iter().enumerate() {
        let gap = (d - e).abs();
        if gap < best_gap {
            best_gap = gap;
            offset_class = j;
        }
    }
    PlaneTarget {
        normal_class,
        normal_residual: n - exemplars.normals[normal_class],
        offset_class,
        offset_residual: d - exemplars.offsets[offset_class],
    }
}

pub fn decode_plane(
    exemplars: &ExemplarSet,
    normal_class: usize,
    normal_residual: &Vector3<f64>,
    offset_class: usize,
    offset_residual: f64,
) -> Result<Plane> {
    let Some(base_normal) = exemplars.normals.get(normal_class) else {
        return Err(Error::Domain(format!(
            "normal class {normal_class} out of range 0..{}",
            exemplars.normals.len()
        )));
    };
    let Some(base_offset) = exemplars.offsets.get(offset_class) else {
        return Err(Error::Domain(format!(
            "offset class {offset_class} out of range 0..{}",
            exemplars.offsets.len()
        )));
    };
    let raw = base_normal + normal_residual;
    let norm = raw.norm();
    if !(norm.is_finite() && norm > 1e-12) {
        return Err(Error::Decode(format!("decoded normal {raw:?} has no direction")));
    }
    let offset = base_offset + offset_residual;
    if !(offset > 0.0 && offset.is_finite()) {
        return Err(Error::Decode(format!("decoded offset {offset} is not positive")));
    }
    Plane::new(raw / norm, offset).map_err(|e| Error::Decode(e.to_string()))
}

impl PlaneTarget {
    pub fn decode(&self, exemplars: &ExemplarSet) -> Result<Plane> {
        decode_plane(
            exemplars,
            self.normal_class,
            &self.normal_residual,
            self.offset_class,
            self.offset_residual,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn axis_set() -> ExemplarSet {
        ExemplarSet::new(
            vec![Vector3::x(), Vector3::y(), Vector3::z()],
            vec![1.0, 2.0, 4.0],
            20.0,
            0,
            [3, 0],
        )
        .unwrap()
    }

    #[test]
    fn axes_are_their_own_exemplars() {
        let axes = vec![
            Vector3::x(),
            -Vector3::x(),
            Vector3::y(),
            -Vector3::y(),
            Vector3::z(),
            -Vector3::z(),
        ];
        let mut got = build_normal_exemplars(&axes, 6, 1).unwrap();
        let key = |v: &Vector3<f64>| (v.x, v.y, v.z);
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        let mut want = axes.clone();
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        assert_eq!(got, want);
    }

    #[test]
    fn single_repeated_normal() {
        let n = Vector3::new(0.0, 0.6, 0.8);
        let got = build_normal_exemplars(&[n; 5], 1, 0).unwrap();
        assert_eq!(got.len(), 1);
        assert!((got[0] - n).norm() < 1e-15);
    }

    #[test]
    fn antipodal_cluster_is_reseeded() {
        // One cluster containing only ±x averages to zero.
        let normals = vec![Vector3::x(), -Vector3::x()];
        let got = build_normal_exemplars(&normals, 1, 0).unwrap();
        assert_eq!(got.len(), 1);
        assert!((got[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn offsets_equal_group_sizes_are_exact() {
        let offsets: Vec<f64> = (1..=10).chain(30..=39).map(f64::from).collect();
        let ex = build_offset_exemplars(&offsets, 20.0, 10, 5).unwrap();
        assert_eq!(ex.values, offsets);
        assert!(ex.warnings.is_empty());
        assert_eq!(ex.group_counts, [10, 10]);
    }

    #[test]
    fn empty_far_group_warns() {
        let offsets: Vec<f64> = (1..=15).map(f64::from).collect();
        let ex = build_offset_exemplars(&offsets, 20.0, 10, 0).unwrap();
        assert_eq!(ex.values.len(), 10);
        assert!(ex.values.iter().all(|&d| d <= 20.0));
        assert_eq!(ex.warnings.len(), 1);
        assert!(build_offset_exemplars(&[], 20.0, 10, 0).is_err());
    }

    #[test]
    fn encode_exact_exemplar_has_zero_residual() {
        let ex = axis_set();
        let t = encode_plane(&Plane::new(Vector3::y(), 2.0).unwrap(), &ex);
        assert_eq!(t.normal_class, 1);
        assert_eq!(t.normal_residual, Vector3::zeros());
        assert_eq!(t.offset_class, 1);
        assert_eq!(t.offset_residual, 0.0);
    }

    #[test]
    fn offset_tie_goes_to_smaller_exemplar() {
        let ex = axis_set();
        let t = encode_plane(&Plane::new(Vector3::z(), 3.0).unwrap(), &ex);
        assert_eq!(t.offset_class, 1);
        assert_eq!(t.offset_residual, 1.0);
        let t = encode_plane(&Plane::new(Vector3::z(), 1.5).unwrap(), &ex);
        assert_eq!(t.offset_class, 0);
    }

    #[test]
    fn decode_arithmetic() {
        let ex = axis_set();
        let p = decode_plane(&ex, 2, &Vector3::zeros(), 0, 0.0).unwrap();
        assert_eq!(p, Plane::new(Vector3::z(), 1.0).unwrap());
        let p = decode_plane(&ex, 0, &Vector3::new(-1.0, 0.0, 1.0), 2, 0.5).unwrap();
        assert_eq!(p.normal(), Vector3::z());
        assert_eq!(p.offset(), 4.5);
    }

    #[test]
    fn decode_errors() {
        let ex = axis_set();
        assert!(matches!(
            decode_plane(&ex, 3, &Vector3::zeros(), 0, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            decode_plane(&ex, 0, &Vector3::zeros(), 3, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            decode_plane(&ex, 0, &Vector3::zeros(), 0, -1.0),
            Err(Error::Decode(_))
        ));
        assert!(matches!(
            decode_plane(&ex, 0, &-Vector3::x(), 0, 0.0),
            Err(Error::Decode(_))
        ));
    }

    #[test]
    fn round_trip_random_planes() {
        let ex = axis_set();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let n = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let Ok(p) = Plane::new(n, rng.random_range(0.1..50.0)) else {
                continue;
            };
            let back = encode_plane(&p, &ex).decode(&ex).unwrap();
            assert!(back.angle_to(&p) < 1e-12);
            assert!((back.offset() - p.offset()).abs() < 1e-12);
        }
    }

    #[test]
    fn exemplar_json_round_trip_and_validation() {
        let ex = axis_set();
        let json = serde_json::to_string(&ex).unwrap();
        assert!(json.starts_with(r#"{"normals":[[1.0,0.0,0.0]"#));
        let back: ExemplarSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, ex);
        let unsorted = r#"{"normals":[[0,0,1]],"offsets":[3,1],"split_threshold":20,"seed":0}"#;
        assert!(serde_json::from_str::<ExemplarSet>(unsorted).is_err());
    }
}
