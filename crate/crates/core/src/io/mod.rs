//! Files: depth rasters, instance masks, annotation directories, intrinsics,
//! configuration, exemplars and meshes.
//!
//! | data | format |
//! |------|--------|
//! | depth | 16-bit grayscale PNG, `value / scale` meters, `0` invalid; or raw `PKDEPTH1` float file |
//! | instance mask | 8- or 16-bit grayscale PNG of instance ids, `0` unlabeled |
//! | class table | JSON object `{"<id>": "<class>"}` |
//! | annotation | directory with `planes.png` (8- or 16-bit labels) and `planes.json` |
//! | intrinsics | JSON `{fx, fy, cx, cy, width, height}` |
//! | mesh | ASCII PLY |

mod annotation;
mod config;
mod json;
mod raster;

pub use annotation::{
    load_annotation, load_intrinsics, save_annotation, save_intrinsics, save_mesh, LABELS_FILE,
    SIDECAR_FILE,
};
pub use config::{load_config, PipelineConfig};
pub use json::{load_json, save_json, to_json_string};
pub use raster::{
    load_depth, load_segmentation, read_gray_png, save_depth, save_depth_png, save_depth_raw,
    save_segmentation, write_gray_png, DepthEncoding, GrayImage, RAW_DEPTH_MAGIC,
};
