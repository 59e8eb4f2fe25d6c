//! Segmentation agreement (RI, VOI, SC) and plane recall at depth and normal thresholds.

mod recall;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fitting::PlaneAnnotation;

pub use recall::{
    evaluate_image, plane_recall, Domain, EvalReport, ImageEval, MatchedPair, RecallCounts,
    RecallSpec,
};

/// Per-pixel labels; `0` marks non-planar pixels but is otherwise an ordinary segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegLabeling {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
}

impl SegLabeling {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::Config(format!(
                "{} labels for a {width}x{height} image",
                labels.len()
            )));
        }
        Ok(SegLabeling {
            width,
            height,
            labels,
        })
    }

    pub fn from_annotation(a: &PlaneAnnotation) -> Self {
        SegLabeling {
            width: a.width(),
            height: a.height(),
            labels: a.label_raster(),
        }
    }
}

/// Joint label counts of two labelings.
struct Contingency {
    n: u64,
    joint: BTreeMap<(u32, u32), u64>,
    rows: BTreeMap<u32, u64>,
    cols: BTreeMap<u32, u64>,
}

impl Contingency {
    fn new(a: &SegLabeling, b: &SegLabeling) -> Result<Self> {
        if (a.width, a.height) != (b.width, b.height) {
            return Err(Error::Config(format!(
                "labelings are {}x{} and {}x{}",
                a.width, a.height, b.width, b.height
            )));
        }
        let mut joint = BTreeMap::new();
        let mut rows = BTreeMap::new();
        let mut cols = BTreeMap::new();
        for (&la, &lb) in a.labels.iter().zip(&b.labels) {
            *joint.entry((la, lb)).or_insert(0) += 1;
            *rows.entry(la).or_insert(0) += 1;
            *cols.entry(lb).or_insert(0) += 1;
        }
        Ok(Contingency {
            n: a.labels.len() as u64,
            joint,
            rows,
            cols,
        })
    }
}

fn pairs(n: u64) -> u128 {
    let n = n as u128;
    n * n.saturating_sub(1) / 2
}

/// Fraction of pixel pairs on which both labelings agree about co-membership.
///
/// Exact integer arithmetic on the contingency table; images with fewer than two pixels
/// score `1`.
pub fn rand_index(a: &SegLabeling, b: &SegLabeling) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    let total = pairs(t.n);
    if total == 0 {
        return Ok(1.0);
    }
    let same_both: u128 = t.joint.values().map(|&c| pairs(c)).sum();
    let same_a: u128 = t.rows.values().map(|&c| pairs(c)).sum();
    let same_b: u128 = t.cols.values().map(|&c| pairs(c)).sum();
    // agree = pairs together in both + pairs apart in both
    let agree = total + 2 * same_both - same_a - same_b;
    Ok(agree as f64 / total as f64)
}

/// `H(a) + H(b) - 2·I(a; b)` in nats.
pub fn variation_of_information(a: &SegLabeling, b: &SegLabeling) -> Result<f64> {
    let t = Contingency::new(a, b)?;
    if t.n == 0 {
        return Ok(0.0);
    }
    let n = t.n as f64;
    // Σ p_ij·[ln(p_i / p_ij) + ln(p_j / p_ij)]
    let voi: f64 = t
        .joint
        .iter()
        .map(|(&(la, lb), &c)| {
            let c = c as f64;
            let ra = t.rows[&la] as f64;
            let cb = t.cols[&lb] as f64;
            (c / n) * ((ra / c).ln() + (cb / c).ln())
        })
        .sum();
    Ok(voi.max(0.0))
}

/// Size-weighted best IoU of every ground-truth segment against the predicted segments.
pub fn seg_covering(gt: &SegLabeling, pred: &SegLabeling) -> Result<f64> {
    let t = Contingency::new(gt, pred)?;
    if t.n == 0 {
        return Ok(1.0);
    }
    let mut best: BTreeMap<u32, f64> = BTreeMap::new();
    for (&(lg, lp), &inter) in &t.joint {
        let union = t.rows[&lg] + t.cols[&lp] - inter;
        let iou = inter as f64 / union as f64;
        let e = best.entry(lg).or_insert(0.0);
        *e = e.max(iou);
    }
    let covered: f64 = best.iter().map(|(l, iou)| t.rows[l] as f64 * iou).sum();
    Ok(covered / t.n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lab(labels: &[u32]) -> SegLabeling {
        SegLabeling::new(labels.len(), 1, labels.to_vec()).unwrap()
    }

    /// O(N²) pair enumeration.
    fn rand_index_pairs(a: &SegLabeling, b: &SegLabeling) -> f64 {
        let n = a.labels.len();
        if n < 2 {
            return 1.0;
        }
        let (mut agree, mut total) = (0u64, 0u64);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a.labels[i] == a.labels[j];
                let sb = b.labels[i] == b.labels[j];
                agree += (sa == sb) as u64;
                total += 1;
            }
        }
        agree as f64 / total as f64
    }

    #[test]
    fn small_examples() {
        let a = lab(&[0, 0, 1, 1]);
        let b = lab(&[0, 1, 1, 1]);
        let c = lab(&[4, 4, 4, 4]);
        assert_eq!(rand_index(&a, &b).unwrap(), 0.5);
        assert!((variation_of_information(&a, &c).unwrap() - 2f64.ln()).abs() < 1e-12);
        assert_eq!(seg_covering(&a, &c).unwrap(), 0.5);
        assert_eq!(rand_index(&a, &a).unwrap(), 1.0);
        assert_eq!(variation_of_information(&a, &a).unwrap(), 0.0);
        assert_eq!(seg_covering(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn even_split_covering() {
        // Every gt segment splits into two equal halves: best IoU 1/2 each.
        let gt = lab(&[1, 1, 2, 2, 3, 3, 3, 3]);
        let pred = lab(&[5, 6, 7, 8, 9, 9, 0, 0]);
        // gt 1: IoU 1/2, gt 2: 1/2, gt 3: 2/4
        assert_eq!(seg_covering(&gt, &pred).unwrap(), 0.5);
    }

    #[test]
    fn dimension_mismatch() {
        let a = lab(&[0, 1]);
        let b = SegLabeling::new(1, 2, vec![0, 1]).unwrap();
        assert!(rand_index(&a, &b).is_err());
        assert!(variation_of_information(&a, &b).is_err());
        assert!(seg_covering(&a, &b).is_err());
    }

    fn labeling_pair() -> impl Strategy<Value = (SegLabeling, SegLabeling)> {
        (1usize..=12, 1usize..=12, 1u32..6).prop_flat_map(|(w, h, k)| {
            let v = proptest::collection::vec(0..k, w * h);
            (v.clone(), v).prop_map(move |(a, b)| {
                (SegLabeling::new(w, h, a).unwrap(), SegLabeling::new(w, h, b).unwrap())
            })
        })
    }

    proptest! {
        #[test]
        fn rand_index_matches_pairwise((a, b) in labeling_pair()) {
            prop_assert_eq!(rand_index(&a, &b).unwrap(), rand_index_pairs(&a, &b));
        }

        #[test]
        fn metrics_in_range_and_symmetric((a, b) in labeling_pair()) {
            let ri = rand_index(&a, &b).unwrap();
            let sc = seg_covering(&a, &b).unwrap();
            let voi = variation_of_information(&a, &b).unwrap();
            prop_assert!((0.0..=1.0).contains(&ri));
            prop_assert!((0.0..=1.0 + 1e-12).contains(&sc));
            prop_assert!(voi >= 0.0);
            prop_assert!((voi - variation_of_information(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert_eq!(ri, rand_index(&b, &a).unwrap());
        }

        #[test]
        fn label_permutation_invariance((a, b) in labeling_pair(), shift in 1u32..100) {
            let relabeled = SegLabeling {
                labels: b.labels.iter().map(|l| (l * 7 + shift) % 1000).collect(),
                ..b.clone()
            };
            prop_assert_eq!(rand_index(&a, &b).unwrap(), rand_index(&a, &relabeled).unwrap());
            prop_assert!((seg_covering(&a, &b).unwrap() - seg_covering(&a, &relabeled).unwrap()).abs() < 1e-12);
            prop_assert!((variation_of_information(&a, &b).unwrap()
                - variation_of_information(&a, &relabeled).unwrap()).abs() < 1e-12);
        }
    }
}
