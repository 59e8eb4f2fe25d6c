//! Plane annotation, exemplar encoding, matching losses and plane reconstruction
//! metrics for depth images.
//!
//! ```
//! use planekit::fitting::{annotate_image, CategoryRangeTable, FittingConfig};
//! use planekit::geometry::{synth_scene, CameraIntrinsics, SceneSpec};
//! use planekit::metrics::{evaluate_image, RecallSpec};
//!
//! let k = CameraIntrinsics::new(120.0, 120.0, 80.0, 60.0, 160, 120).unwrap();
//! let scene = synth_scene(&SceneSpec::default(), &k).unwrap();
//! let ann = annotate_image(
//!     &scene.depth,
//!     &scene.segmentation,
//!     &k,
//!     &CategoryRangeTable::default(),
//!     &FittingConfig::default(),
//! )
//! .unwrap();
//! let eval = evaluate_image("scene", &ann, &scene.ground_truth(), &RecallSpec::indoor()).unwrap();
//! assert!(eval.rand_index > 0.99);
//! ```
//!
//! The guide in `book/` walks through each module.

pub mod error;
pub mod exemplars;
pub mod fitting;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod metrics;
pub mod pipeline;

pub use error::{Error, ErrorKind, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/annotation.md")]
    mod annotation {}
    #[doc = include_str!("../../../book/src/exemplars.md")]
    mod exemplars {}
    #[doc = include_str!("../../../book/src/matching.md")]
    mod matching {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
