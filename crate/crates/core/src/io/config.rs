use std::path::Path;

use serde::{Deserialize, Serialize};

use super::json::load_json;
use crate::error::Result;
use crate::fitting::{CategoryRangeTable, FittingConfig};
use crate::matching::LossWeights;

/// Contents of a pipeline configuration file. Every section is optional.
///
/// ```json
/// {
///   "fitting": { "ransac_iterations": 200, "seed": 7 },
///   "ranges": { "wall": [1, 2], "default": [0, 3] },
///   "loss_weights": { "lambda_c": 2.0 }
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub fitting: FittingConfig,
    pub ranges: CategoryRangeTable,
    pub loss_weights: LossWeights,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.fitting.validate()?;
        self.ranges.validate()?;
        self.loss_weights.validate()
    }
}

/// Loads and validates a configuration file. A missing `ranges` section keeps the
/// built-in table; a present one replaces it.
pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let cfg: PipelineConfig = load_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}
