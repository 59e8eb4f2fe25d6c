use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{rand_index, seg_covering, variation_of_information, SegLabeling};
use crate::error::{Error, Result};
use crate::fitting::PlaneAnnotation;
use crate::geometry::{render_planar_depth, CameraIntrinsics};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Indoor,
    Outdoor,
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indoor" => Ok(Domain::Indoor),
            "outdoor" => Ok(Domain::Outdoor),
            other => Err(Error::Config(format!(
                "unknown domain {other:?}, expected indoor or outdoor"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecallSpec {
    /// A prediction can only match a ground-truth plane with mask IoU strictly above this.
    pub iou_threshold: f64,
    /// Meters, ascending.
    pub depth_thresholds: Vec<f64>,
    /// Degrees, ascending.
    pub normal_thresholds: Vec<f64>,
}

impl RecallSpec {
    pub fn indoor() -> Self {
        RecallSpec {
            iou_threshold: 0.5,
            depth_thresholds: vec![0.05, 0.1, 0.6],
            normal_thresholds: vec![5.0, 10.0, 30.0],
        }
    }

    pub fn outdoor() -> Self {
        RecallSpec {
            depth_thresholds: vec![1.0, 3.0, 10.0],
            ..Self::indoor()
        }
    }

    pub fn for_domain(domain: Domain) -> Self {
        match domain {
            Domain::Indoor => Self::indoor(),
            Domain::Outdoor => Self::outdoor(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.iou_threshold) {
            return Err(Error::Config("iou_threshold must be in [0, 1)".into()));
        }
        for (name, t) in [
            ("depth", &self.depth_thresholds),
            ("normal", &self.normal_thresholds),
        ] {
            if t.iter().any(|x| !(x.is_finite() && *x > 0.0)) || t.windows(2).any(|w| w[0] >= w[1])
            {
                return Err(Error::Config(format!(
                    "{name} thresholds must be positive and strictly ascending"
                )));
            }
        }
        Ok(())
    }
}

impl Default for RecallSpec {
    fn default() -> Self {
        Self::indoor()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gt: usize,
    pub pred: usize,
    pub iou: f64,
    /// Mean planar depth difference over the mask intersection; `None` when neither plane
    /// is visible on any intersection pixel.
    pub depth_error: Option<f64>,
    /// Degrees.
    pub normal_error: f64,
}

/// Hit counts per threshold. Merging is a plain sum, so any grouping gives the same total.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RecallCounts {
    pub gt_planes: usize,
    pub depth_hits: Vec<usize>,
    pub normal_hits: Vec<usize>,
}

impl RecallCounts {
    pub fn merge(&mut self, other: &RecallCounts) {
        fn add(a: &mut Vec<usize>, b: &[usize]) {
            if a.len() < b.len() {
                a.resize(b.len(), 0);
            }
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.gt_planes += other.gt_planes;
        add(&mut self.depth_hits, &other.depth_hits);
        add(&mut self.normal_hits, &other.normal_hits);
    }

    /// `None` when there are no ground-truth planes.
    pub fn depth_recall(&self) -> Option<Vec<f64>> {
        self.ratios(&self.depth_hits)
    }

    pub fn normal_recall(&self) -> Option<Vec<f64>> {
        self.ratios(&self.normal_hits)
    }

    fn ratios(&self, hits: &[usize]) -> Option<Vec<f64>> {
        (self.gt_planes > 0).then(|| {
            hits.iter()
                .map(|&h| h as f64 / self.gt_planes as f64)
                .collect()
        })
    }
}

/// Greedy one-to-one matching by descending mask IoU, then per-pair depth and normal
/// errors and hit counts at every threshold.
pub fn plane_recall(
    pred: &PlaneAnnotation,
    gt: &PlaneAnnotation,
    k: &CameraIntrinsics,
    spec: &RecallSpec,
) -> Result<(RecallCounts, Vec<MatchedPair>)> {
    spec.validate()?;
    let dims = (k.width, k.height);
    if (pred.width(), pred.height()) != dims || (gt.width(), gt.height()) != dims {
        return Err(Error::Config(format!(
            "annotations are {}x{} (pred) and {}x{} (gt), camera is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height(),
            k.width,
            k.height
        )));
    }
    let mut candidates = Vec::new();
    for (g, gp) in gt.planes.iter().enumerate() {
        for (p, pp) in pred.planes.iter().enumerate() {
            let iou = gp.mask.iou(&pp.mask);
            if iou > spec.iou_threshold {
                candidates.push((iou, g, p));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = vec![false; gt.planes.len()];
    let mut pred_used = vec![false; pred.planes.len()];
    let mut pairs = Vec::new();
    for (iou, g, p) in candidates {
        if gt_used[g] || pred_used[p] {
            continue;
        }
        gt_used[g] = true;
        pred_used[p] = true;
        let (gp, pp) = (&gt.planes[g], &pred.planes[p]);
        let inter = gp.mask.intersection(&pp.mask);
        let dg = render_planar_depth(&gp.plane, &inter, k);
        let dp = render_planar_depth(&pp.plane, &inter, k);
        let (sum, count) = inter
            .indices()
            .iter()
            .filter_map(|&i| Some((dp.get_index(i as usize)? - dg.get_index(i as usize)?).abs()))
            .fold((0.0, 0usize), |(s, c), e| (s + e, c + 1));
        pairs.push(MatchedPair {
            gt: g,
            pred: p,
            iou,
            depth_error: (count > 0).then(|| sum / count as f64),
            normal_error: gp.plane.angle_to(&pp.plane).to_degrees(),
        });
    }
    pairs.sort_by_key(|m| m.gt);
    let hits = |thresholds: &[f64], err: &dyn Fn(&MatchedPair) -> Option<f64>| {
        thresholds
            .iter()
            .map(|&t| pairs.iter().filter(|m| err(m).is_some_and(|e| e <= t)).count())
            .collect()
    };
    let counts = RecallCounts {
        gt_planes: gt.planes.len(),
        depth_hits: hits(&spec.depth_thresholds, &|m| m.depth_error),
        normal_hits: hits(&spec.normal_thresholds, &|m| Some(m.normal_error)),
    };
    Ok((counts, pairs))
}

/// All metrics of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub name: String,
    pub rand_index: f64,
    pub voi: f64,
    pub seg_covering: f64,
    pub counts: RecallCounts,
    pub pairs: Vec<MatchedPair>,
}

pub fn evaluate_image(
    name: &str,
    pred: &PlaneAnnotation,
    gt: &PlaneAnnotation,
    spec: &RecallSpec,
) -> Result<ImageEval> {
    let (counts, pairs) = plane_recall(pred, gt, &gt.camera, spec)?;
    let a = SegLabeling::from_annotation(gt);
    let b = SegLabeling::from_annotation(pred);
    Ok(ImageEval {
        name: name.to_string(),
        rand_index: rand_index(&a, &b)?,
        voi: variation_of_information(&a, &b)?,
        seg_covering: seg_covering(&a, &b)?,
        counts,
        pairs,
    })
}

/// Dataset summary: segmentation metrics averaged over images, recall pooled over planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub images: usize,
    pub rand_index: f64,
    pub voi: f64,
    pub seg_covering: f64,
    pub spec: RecallSpec,
    pub counts: RecallCounts,
    /// `None` when the ground truth holds no planes.
    pub depth_recall: Option<Vec<f64>>,
    pub normal_recall: Option<Vec<f64>>,
    pub per_image: Vec<ImageEval>,
}

impl EvalReport {
    pub fn from_images(per_image: Vec<ImageEval>, spec: &RecallSpec) -> Self {
        let n = per_image.len();
        let avg = |f: fn(&ImageEval) -> f64| {
            if n == 0 {
                0.0
            } else {
                per_image.iter().map(f).sum::<f64>() / n as f64
            }
        };
        let mut counts = RecallCounts {
            depth_hits: vec![0; spec.depth_thresholds.len()],
            normal_hits: vec![0; spec.normal_thresholds.len()],
            ..RecallCounts::default()
        };
        for e in &per_image {
            counts.merge(&e.counts);
        }
        EvalReport {
            images: n,
            rand_index: avg(|e| e.rand_index),
            voi: avg(|e| e.voi),
            seg_covering: avg(|e| e.seg_covering),
            spec: spec.clone(),
            depth_recall: counts.depth_recall(),
            normal_recall: counts.normal_recall(),
            counts,
            per_image,
        }
    }

    /// Plain-text table: `RI↑ VOI↓ SC↑` followed by one recall column per threshold.
    pub fn to_table(&self) -> String {
        let mut header = format!("{:>8} {:>8} {:>8}", "RI↑", "VOI↓", "SC↑");
        let mut row = format!(
            "{:>8.4} {:>8.4} {:>8.4}",
            self.rand_index, self.voi, self.seg_covering
        );
        let columns = self
            .spec
            .depth_thresholds
            .iter()
            .map(|t| format!("D@{t}m"))
            .zip(self.depth_recall.iter().flatten().map(Some).chain(std::iter::repeat(None)))
            .chain(
                self.spec
                    .normal_thresholds
                    .iter()
                    .map(|t| format!("N@{t}°"))
                    .zip(self.normal_recall.iter().flatten().map(Some).chain(std::iter::repeat(None))),
            );
        for (name, value) in columns {
            let _ = write!(header, " {name:>9}");
            match value {
                Some(v) => {
                    let _ = write!(row, " {:>9.4}", v);
                }
                None => {
                    let _ = write!(row, " {:>9}", "n/a");
                }
            }
        }
        format!(
            "{header}\n{row}\n({} images, {} ground-truth planes)\n",
            self.images, self.counts.gt_planes
        )
    }
}
