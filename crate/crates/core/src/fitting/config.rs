use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// When the distance-aware threshold is applied inside RANSAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdStage {
    /// Hypotheses are scored with a threshold derived from the candidate inliers' mean
    /// depth, and the refit proposal is checked again against its own threshold.
    #[default]
    ScoringAndFinal,
    /// Hypotheses are scored with the threshold of the whole working set's mean depth;
    /// only the final rejection test uses the proposal's own threshold.
    FinalOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FittingConfig {
    pub ransac_iterations: usize,
    /// Fitting error (meters) accepted at `reference_depth`.
    pub reference_error: f64,
    pub reference_depth: f64,
    /// Planes with fewer mask pixels are dropped after merging.
    pub min_plane_pixels: usize,
    /// Minimum inlier count of a proposal, as a fraction of the instance's points.
    pub min_inlier_ratio: f64,
    pub merge_angle_tol_deg: f64,
    pub merge_offset_rel_tol: f64,
    pub threshold_stage: ThresholdStage,
    pub seed: u64,
}

impl Default for FittingConfig {
    fn default() -> Self {
        FittingConfig {
            ransac_iterations: 200,
            reference_error: 0.05,
            reference_depth: 10.0,
            min_plane_pixels: 200,
            min_inlier_ratio: 0.10,
            merge_angle_tol_deg: 10.0,
            merge_offset_rel_tol: 0.05,
            threshold_stage: ThresholdStage::ScoringAndFinal,
            seed: 0,
        }
    }
}

impl FittingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ransac_iterations == 0 || self.min_plane_pixels == 0 {
            return Err(Error::Config(
                "ransac_iterations and min_plane_pixels must be at least 1".into(),
            ));
        }
        let positive = [
            ("reference_error", self.reference_error),
            ("reference_depth", self.reference_depth),
            ("merge_angle_tol_deg", self.merge_angle_tol_deg),
            ("merge_offset_rel_tol", self.merge_offset_rel_tol),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {value}")));
            }
        }
        if !(self.min_inlier_ratio > 0.0 && self.min_inlier_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "min_inlier_ratio must be in (0, 1], got {}",
                self.min_inlier_ratio
            )));
        }
        Ok(())
    }
}

/// Inclusive `[min, max]` number of planes expected inside one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct PlaneRange {
    pub min: usize,
    pub max: usize,
}

impl PlaneRange {
    pub const fn new(min: usize, max: usize) -> Self {
        PlaneRange { min, max }
    }
}

impl From<[usize; 2]> for PlaneRange {
    fn from([min, max]: [usize; 2]) -> Self {
        PlaneRange { min, max }
    }
}

impl From<PlaneRange> for [usize; 2] {
    fn from(r: PlaneRange) -> Self {
        [r.min, r.max]
    }
}

/// Plane-number range per semantic class. Classes without an entry use `default`;
/// a `[0, 0]` entry excludes a class from fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRangeTable {
    #[serde(flatten)]
    pub classes: BTreeMap<String, PlaneRange>,
}

const DEFAULT_KEY: &str = "default";

impl Default for CategoryRangeTable {
    fn default() -> Self {
        let classes = [
            ("road", PlaneRange::new(1, 2)),
            ("wall", PlaneRange::new(1, 2)),
            ("building", PlaneRange::new(1, 5)),
            ("vehicle", PlaneRange::new(0, 2)),
            ("floor", PlaneRange::new(0, 1)),
            ("furniture", PlaneRange::new(0, 5)),
            (DEFAULT_KEY, PlaneRange::new(0, 3)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        CategoryRangeTable { classes }
    }
}

impl CategoryRangeTable {
    pub fn range_for(&self, class: &str) -> PlaneRange {
        self.classes
            .get(class)
            .or_else(|| self.classes.get(DEFAULT_KEY))
            .copied()
            .unwrap_or(PlaneRange::new(0, 0))
    }

    pub fn validate(&self) -> Result<()> {
        for (class, r) in &self.classes {
            if r.min > r.max {
                return Err(Error::Config(format!(
                    "plane range for {class:?} has min {} > max {}",
                    r.min, r.max
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_ranges() {
        let t = CategoryRangeTable::default();
        assert_eq!(t.range_for("road"), PlaneRange::new(1, 2));
        assert_eq!(t.range_for("building"), PlaneRange::new(1, 5));
        assert_eq!(t.range_for("sofa"), PlaneRange::new(0, 3));
        t.validate().unwrap();
    }

    #[test]
    fn range_table_json_shape() {
        let t: CategoryRangeTable =
            serde_json::from_str(r#"{"wall": [1, 2], "sky": [0, 0]}"#).unwrap();
        assert_eq!(t.range_for("sky"), PlaneRange::new(0, 0));
        // No default entry: unknown classes are skipped.
        assert_eq!(t.range_for("car"), PlaneRange::new(0, 0));
        let bad: CategoryRangeTable = serde_json::from_str(r#"{"wall": [3, 2]}"#).unwrap();
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_validation() {
        FittingConfig::default().validate().unwrap();
        let bad = FittingConfig {
            min_inlier_ratio: 0.0,
            ..FittingConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = FittingConfig {
            ransac_iterations: 0,
            ..FittingConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
