use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Vec<Vec<f64>>,
    /// Cluster index of every input vector after the last assignment step.
    pub assignment: Vec<usize>,
    /// Within-cluster sum of squares after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl KMeansResult {
    pub fn inertia(&self) -> f64 {
        self.inertia_history.last().copied().unwrap_or(0.0)
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest center; ties go to the lowest index.
fn nearest(point: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centers.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd's k-means with seeded farthest-point initialization.
///
/// The first center is a seeded random input; each further center is the input farthest
/// from the centers chosen so far (lowest index on ties). Iterates until the assignment
/// stops changing or `max_iters` assignment steps ran. A cluster that ends up empty is
/// re-seeded with the input farthest from its current center.
pub fn kmeans<V: AsRef<[f64]>>(
    data: &[V],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::Domain("k-means needs k >= 1".into()));
    }
    if data.len() < k {
        return Err(Error::Domain(format!(
            "k-means needs at least k = {k} vectors, got {}",
            data.len()
        )));
    }
    let dim = data[0].as_ref().len();
    if data.iter().any(|v| v.as_ref().len() != dim) {
        return Err(Error::Domain("k-means inputs differ in dimension".into()));
    }
    let points: Vec<&[f64]> = data.iter().map(AsRef::as_ref).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..points.len())].to_vec()];
    let mut min_dist: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let (far, _) = min_dist
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &d)| if d > best.1 { (i, d) } else { best });
        let center = points[far].to_vec();
        for (d, p) in min_dist.iter_mut().zip(&points) {
            *d = d.min(sq_dist(p, &center));
        }
        centers.push(center);
    }

    let mut assignment = vec![usize::MAX; points.len()];
    let mut inertia_history = Vec::new();
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut inertia = 0.0;
        for (a, p) in assignment.iter_mut().zip(&points) {
            let (c, d) = nearest(p, &centers);
            changed |= *a != c;
            *a = c;
            inertia += d;
        }
        inertia_history.push(inertia);
        if !changed {
            break;
        }

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&c, p) in assignment.iter().zip(&points) {
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p.iter()) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let mut moved = vec![false; points.len()];
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let (far, _) = points
                .iter()
                .enumerate()
                .filter(|&(i, _)| !moved[i])
                .map(|(i, p)| (i, sq_dist(p, &centers[assignment[i]])))
                .fold((usize::MAX, f64::NEG_INFINITY), |best, (i, d)| {
                    if d > best.1 {
                        (i, d)
                    } else {
                        best
                    }
                });
            if far == usize::MAX {
                continue;
            }
            centers[c] = points[far].to_vec();
            moved[far] = true;
        }
    }

    Ok(KMeansResult {
        centers,
        assignment,
        inertia_history,
    })
}
