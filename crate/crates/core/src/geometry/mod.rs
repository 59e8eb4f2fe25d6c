//! Pinhole camera, rasters, plane algebra, synthetic scenes and mesh export.

mod camera;
mod mesh;
mod plane;
mod raster;
mod synth;

pub use camera::CameraIntrinsics;
pub use mesh::{export_mesh, plane_color, Mesh};
pub use plane::{
    angle_between, backproject, fit_plane_lsq, plane_from_three_points, point_plane_residuals,
    render_planar_depth, Plane, PointCloud, MIN_PLANE_OFFSET, RAY_EPSILON,
};
pub use raster::{DepthMap, InstanceSegmentation, NormalMap, PixelMask, DEFAULT_CLASS};
pub use synth::{synth_scene, SceneSpec, SyntheticScene, SYNTH_CLASS};
