use std::collections::BTreeSet;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exemplars::PlaneTarget;
use crate::fitting::PlaneAnnotation;
use crate::geometry::{DepthMap, NormalMap, PixelMask};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside logarithms.
pub const PROB_CLAMP: f64 = 1e-12;

/// Additive smoothing of the dice ratio.
pub const DICE_SMOOTH: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub lambda_c: f64,
    pub lambda_m: f64,
    pub lambda_n_c: f64,
    pub lambda_n_r: f64,
    pub lambda_d_c: f64,
    pub lambda_d_r: f64,
    pub lambda_p_d: f64,
    pub lambda_p_n_l1: f64,
    pub lambda_p_n_cos: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_c: 2.0,
            lambda_m: 5.0,
            lambda_n_c: 1.0,
            lambda_n_r: 5.0,
            lambda_d_c: 1.0,
            lambda_d_r: 2.0,
            lambda_p_d: 0.5,
            lambda_p_n_l1: 1.0,
            lambda_p_n_cos: 5.0,
        }
    }
}

impl LossWeights {
    fn as_array(&self) -> [f64; 9] {
        [
            self.lambda_c,
            self.lambda_m,
            self.lambda_n_c,
            self.lambda_n_r,
            self.lambda_d_c,
            self.lambda_d_r,
            self.lambda_p_d,
            self.lambda_p_n_l1,
            self.lambda_p_n_cos,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.as_array().iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(format!(
                "loss weights must be finite and nonnegative: {self:?}"
            )));
        }
        Ok(())
    }
}

/// Outputs of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPrediction {
    /// Probability that the query is a plane.
    pub plane_prob: f64,
    /// Row-major `H×W` mask logits.
    pub mask_logits: Vec<f64>,
    pub normal_class_logits: Vec<f64>,
    /// One residual per normal exemplar.
    pub normal_residuals: Vec<[f64; 3]>,
    pub offset_class_logits: Vec<f64>,
    /// One residual per offset exemplar.
    pub offset_residuals: Vec<f64>,
}

/// Predictions of one image: per-query outputs and optional dense pixel maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub width: usize,
    pub height: usize,
    pub queries: Vec<QueryPrediction>,
    #[serde(default)]
    pub pixel_depth: Option<Vec<f64>>,
    #[serde(default)]
    pub pixel_normals: Option<Vec<[f64; 3]>>,
}

impl PredictionSet {
    /// Checks that every query agrees with the image size and with the first query's
    /// exemplar counts. Returns `(normal classes, offset classes)`.
    pub fn validate(&self) -> Result<(usize, usize)> {
        let pixels = self.width * self.height;
        let counts = self
            .queries
            .first()
            .map_or((0, 0), |q| (q.normal_class_logits.len(), q.offset_class_logits.len()));
        for (i, q) in self.queries.iter().enumerate() {
            let bad = |what: &str| Err(Error::Config(format!("query {i}: {what}")));
            if !(0.0..=1.0).contains(&q.plane_prob) {
                return bad("plane probability outside [0, 1]");
            }
            if q.mask_logits.len() != pixels {
                return bad(&format!(
                    "{} mask logits for a {}x{} image",
                    q.mask_logits.len(),
                    self.width,
                    self.height
                ));
            }
            if q.normal_class_logits.len() != counts.0 || q.normal_residuals.len() != counts.0 {
                return bad("normal logits/residuals disagree with the other queries");
            }
            if q.offset_class_logits.len() != counts.1 || q.offset_residuals.len() != counts.1 {
                return bad("offset logits/residuals disagree with the other queries");
            }
            let finite = q
                .mask_logits
                .iter()
                .chain(&q.normal_class_logits)
                .chain(q.normal_residuals.iter().flatten())
                .chain(&q.offset_class_logits)
                .chain(&q.offset_residuals)
                .all(|x| x.is_finite());
            if !finite {
                return bad("non-finite value");
            }
        }
        if let Some(d) = &self.pixel_depth {
            if d.len() != pixels || d.iter().any(|x| !x.is_finite()) {
                return Err(Error::Config("pixel depth map has the wrong size or non-finite values".into()));
            }
        }
        if let Some(n) = &self.pixel_normals {
            if n.len() != pixels || n.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Config("pixel normal map has the wrong size or non-finite values".into()));
            }
        }
        Ok(counts)
    }
}

/// Per-term losses and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_c: f64,
    pub l_m: f64,
    pub l_n_c: f64,
    pub l_n_r: f64,
    pub l_d_c: f64,
    pub l_d_r: f64,
    pub l_p_d: f64,
    pub l_p_n_l1: f64,
    pub l_p_n_cos: f64,
    /// `λ_p_n_l1·l_p_n_l1 + λ_p_n_cos·l_p_n_cos`.
    pub l_p_n: f64,
    pub total: f64,
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// `-[y·ln p + (1 - y)·ln(1 - p)]` with clamped `p`.
#[inline]
pub fn binary_cross_entropy(p: f64, positive: bool) -> f64 {
    let p = clamp_prob(p);
    if positive {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `-log softmax(logits)[class]`, computed with the log-sum-exp shift.
pub fn softmax_cross_entropy(logits: &[f64], class: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[class]
}

/// Mean per-pixel BCE of `probs` against `mask`.
pub fn mask_bce(probs: &[f64], mask: &PixelMask) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    let mut total: f64 = probs.iter().map(|&p| binary_cross_entropy(p, false)).sum();
    for &i in mask.indices() {
        let p = probs[i as usize];
        total += binary_cross_entropy(p, true) - binary_cross_entropy(p, false);
    }
    total / probs.len() as f64
}

/// `1 - (2Σpg + ε) / (Σp + Σg + ε)`.
pub fn dice_loss(probs: &[f64], mask: &PixelMask) -> f64 {
    let sum_p: f64 = probs.iter().sum();
    let overlap: f64 = mask.indices().iter().map(|&i| probs[i as usize]).sum();
    1.0 - (2.0 * overlap + DICE_SMOOTH) / (sum_p + mask.len() as f64 + DICE_SMOOTH)
}

fn mask_probs(q: &QueryPrediction) -> Vec<f64> {
    q.mask_logits.iter().map(|&x| sigmoid(x)).collect()
}

fn check_image(preds: &PredictionSet, gt: &PlaneAnnotation) -> Result<()> {
    if (preds.width, preds.height) != (gt.width(), gt.height()) {
        return Err(Error::Config(format!(
            "predictions are {}x{}, ground truth is {}x{}",
            preds.width,
            preds.height,
            gt.width(),
            gt.height()
        )));
    }
    Ok(())
}

/// `Q×G` matching cost: `λ_c·(1 - p_q) + λ_m·(BCE + dice)(σ(M_q), mask_g)`.
pub fn matching_cost(
    preds: &PredictionSet,
    gt: &PlaneAnnotation,
    w: &LossWeights,
) -> Result<Vec<Vec<f64>>> {
    check_image(preds, gt)?;
    preds.validate()?;
    w.validate()?;
    Ok(preds
        .queries
        .iter()
        .map(|q| {
            let probs = mask_probs(q);
            gt.planes
                .iter()
                .map(|g| {
                    w.lambda_c * (1.0 - q.plane_prob)
                        + w.lambda_m * (mask_bce(&probs, &g.mask) + dice_loss(&probs, &g.mask))
                })
                .collect()
        })
        .collect())
}

/// Ground truth consumed by [`compute_losses`].
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub annotation: &'a PlaneAnnotation,
    /// Exemplar targets, one per annotation plane.
    pub targets: &'a [PlaneTarget],
    pub pixel_depth: &'a DepthMap,
    pub pixel_normals: &'a NormalMap,
}

fn mean(sum: f64, count: usize) -> f64 {
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Every loss term for one prediction set and a `(query, gt)` assignment.
///
/// Averages: `L_c` over all queries; `L_m` and the exemplar terms over matched pairs
/// (residual L1 over their scalar elements); `L_p_d` over pixels with valid ground-truth
/// depth; `L_p_n_*` over planar ground-truth pixels with a valid normal. A term with an
/// empty supervision set, or whose pixel map was not predicted, is `0`.
pub fn compute_losses(
    preds: &PredictionSet,
    gt: LossInputs<'_>,
    assignment: &[(usize, usize)],
    w: &LossWeights,
) -> Result<LossBreakdown> {
    let ann = gt.annotation;
    check_image(preds, ann)?;
    let (normal_classes, offset_classes) = preds.validate()?;
    w.validate()?;
    if gt.targets.len() != ann.planes.len() {
        return Err(Error::Config(format!(
            "{} targets for {} planes",
            gt.targets.len(),
            ann.planes.len()
        )));
    }
    let dims = (ann.width(), ann.height());
    if (gt.pixel_depth.width(), gt.pixel_depth.height()) != dims
        || (gt.pixel_normals.width(), gt.pixel_normals.height()) != dims
    {
        return Err(Error::Config("ground-truth pixel maps differ in size".into()));
    }
    let q_count = preds.queries.len();
    let mut seen_q = BTreeSet::new();
    let mut seen_g = BTreeSet::new();
    for &(q, g) in assignment {
        if q >= q_count || g >= ann.planes.len() || !seen_q.insert(q) || !seen_g.insert(g) {
            return Err(Error::Config(format!(
                "assignment pair ({q}, {g}) is out of range or repeated"
            )));
        }
    }
    for &(_, g) in assignment {
        let t = &gt.targets[g];
        if t.normal_class >= normal_classes || t.offset_class >= offset_classes {
            return Err(Error::Config(format!(
                "target classes ({}, {}) exceed predicted class counts ({normal_classes}, {offset_classes})",
                t.normal_class, t.offset_class
            )));
        }
    }

    let l_c = mean(
        preds
            .queries
            .iter()
            .enumerate()
            .map(|(i, q)| binary_cross_entropy(q.plane_prob, seen_q.contains(&i)))
            .sum(),
        q_count,
    );

    let mut pairs = assignment.to_vec();
    pairs.sort_by_key(|&(q, g)| (g, q));
    let (mut mask_sum, mut nc_sum, mut nr_sum, mut dc_sum, mut dr_sum) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(q, g) in &pairs {
        let pred = &preds.queries[q];
        let t = &gt.targets[g];
        let probs = mask_probs(pred);
        let mask = &ann.planes[g].mask;
        mask_sum += mask_bce(&probs, mask) + dice_loss(&probs, mask);
        nc_sum += softmax_cross_entropy(&pred.normal_class_logits, t.normal_class);
        dc_sum += softmax_cross_entropy(&pred.offset_class_logits, t.offset_class);
        let row = pred.normal_residuals[t.normal_class];
        nr_sum += (0..3)
            .map(|k| (row[k] - t.normal_residual[k]).abs())
            .sum::<f64>();
        dr_sum += (pred.offset_residuals[t.offset_class] - t.offset_residual).abs();
    }
    let m = pairs.len();

    let l_p_d = match &preds.pixel_depth {
        Some(d) => {
            let (sum, count) = (0..d.len())
                .filter_map(|i| gt.pixel_depth.get_index(i).map(|z| (d[i] - z).abs()))
                .fold((0.0, 0), |(s, c), e| (s + e, c + 1));
            mean(sum, count)
        }
        None => 0.0,
    };

    let (l_p_n_l1, l_p_n_cos) = match &preds.pixel_normals {
        Some(normals) => {
            let planar = ann.planar_mask();
            let (mut l1, mut cos, mut count) = (0.0, 0.0, 0);
            for &i in planar.indices() {
                let Some(n_gt) = gt.pixel_normals.get_index(i as usize) else {
                    continue;
                };
                let n = Vector3::from(normals[i as usize]);
                l1 += (n - n_gt).abs().sum();
                let norm = n.norm();
                let dot = if norm > 0.0 { n.dot(&n_gt) / norm } else { 0.0 };
                cos += (1.0 - dot).max(0.0);
                count += 1;
            }
            (mean(l1, 3 * count), mean(cos, count))
        }
        None => (0.0, 0.0),
    };

    let l_m = mean(mask_sum, m);
    let l_n_c = mean(nc_sum, m);
    let l_n_r = mean(nr_sum, 3 * m);
    let l_d_c = mean(dc_sum, m);
    let l_d_r = mean(dr_sum, m);
    let l_p_n = w.lambda_p_n_l1 * l_p_n_l1 + w.lambda_p_n_cos * l_p_n_cos;
    let total = w.lambda_c * l_c
        + w.lambda_m * l_m
        + w.lambda_n_c * l_n_c
        + w.lambda_n_r * l_n_r
        + w.lambda_d_c * l_d_c
        + w.lambda_d_r * l_d_r
        + w.lambda_p_d * l_p_d
        + l_p_n;
    Ok(LossBreakdown {
        l_c,
        l_m,
        l_n_c,
        l_n_r,
        l_d_c,
        l_d_r,
        l_p_d,
        l_p_n_l1,
        l_p_n_cos,
        l_p_n,
        total,
    })
}
