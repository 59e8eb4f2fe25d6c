use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics. Pixel `(u, v)` has homogeneous coordinate `q = (u, v, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.fx, self.fy, self.cx, self.cy]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Config("intrinsics must be finite".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(Error::Config(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image size must be nonzero".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::Config(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// `K⁻¹ q` for pixel `(u, v)`.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Camera-frame point to continuous pixel coordinates. Returns `None` behind the camera.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64)> {
        if p.z <= 0.0 {
            return None;
        }
        Some((self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy))
    }

    /// Intrinsics for the same sensor resampled by `(sx, sy)`.
    pub fn scaled(&self, sx: f64, sy: f64) -> Result<Self> {
        CameraIntrinsics::new(
            self.fx * sx,
            self.fy * sy,
            self.cx * sx,
            self.cy * sy,
            (self.width as f64 * sx).round() as usize,
            (self.height as f64 * sy).round() as usize,
        )
    }

    /// Lists inconsistencies between `self` and `other` if `other` is meant to be the same
    /// camera at a different resolution. Empty when consistent.
    pub fn resolution_scaling_warnings(&self, other: &CameraIntrinsics) -> Vec<String> {
        let sx = other.width as f64 / self.width as f64;
        let sy = other.height as f64 / self.height as f64;
        let checks = [
            ("fx", self.fx * sx, other.fx),
            ("fy", self.fy * sy, other.fy),
            ("cx", self.cx * sx, other.cx),
            ("cy", self.cy * sy, other.cy),
        ];
        checks
            .iter()
            .filter(|(_, expected, got)| (expected - got).abs() > 1e-6 * expected.abs().max(1.0))
            .map(|(name, expected, got)| {
                format!(
                    "{name} = {got} does not match {expected} expected for a {}x{} resampling",
                    other.width, other.height
                )
            })
            .collect()
    }
}
