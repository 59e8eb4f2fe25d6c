use std::collections::BTreeMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Per-pixel depth (z of the camera-frame point) with a validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// All pixels invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        DepthMap {
            width,
            height,
            values: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    /// Builds a map from raw values; non-finite or nonpositive entries become invalid.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Config(format!(
                "depth buffer has {} values, expected {}x{}",
                values.len(),
                width,
                height
            )));
        }
        let mut map = DepthMap::invalid(width, height);
        for (i, z) in values.into_iter().enumerate() {
            if z.is_finite() && z > 0.0 {
                map.values[i] = z;
                map.valid[i] = true;
            }
        }
        Ok(map)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        self.get_index(v * self.width + u)
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> Option<f64> {
        if self.valid[idx] {
            Some(self.values[idx])
        } else {
            None
        }
    }

    /// Sets a pixel; non-finite or nonpositive depth marks it invalid.
    pub fn set(&mut self, u: usize, v: usize, z: f64) {
        let idx = v * self.width + u;
        self.set_index(idx, z);
    }

    pub fn set_index(&mut self, idx: usize, z: f64) {
        if z.is_finite() && z > 0.0 {
            self.values[idx] = z;
            self.valid[idx] = true;
        } else {
            self.invalidate_index(idx);
        }
    }

    pub fn invalidate_index(&mut self, idx: usize) {
        self.values[idx] = 0.0;
        self.valid[idx] = false;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&b| b).count()
    }

    /// Row-major values; invalid pixels read as 0.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn validity(&self) -> &[bool] {
        &self.valid
    }
}

/// Per-pixel unit normals with a validity flag.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    values: Vec<Vector3<f64>>,
    valid: Vec<bool>,
}

impl NormalMap {
    pub fn invalid(width: usize, height: usize) -> Self {
        NormalMap {
            width,
            height,
            values: vec![Vector3::zeros(); width * height],
            valid: vec![false; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Stores `n` normalized. Zero or non-finite vectors invalidate the pixel.
    pub fn set_index(&mut self, idx: usize, n: Vector3<f64>) {
        let norm = n.norm();
        if norm.is_finite() && norm > 0.0 {
            self.values[idx] = n / norm;
            self.valid[idx] = true;
        } else {
            self.values[idx] = Vector3::zeros();
            self.valid[idx] = false;
        }
    }

    #[inline]
    pub fn get_index(&self, idx: usize) -> Option<Vector3<f64>> {
        if self.valid[idx] {
            Some(self.values[idx])
        } else {
            None
        }
    }
}

/// A set of pixels stored as sorted, row-major linear indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelMask {
    width: usize,
    height: usize,
    indices: Vec<u32>,
}

impl PixelMask {
    pub fn empty(width: usize, height: usize) -> Self {
        PixelMask {
            width,
            height,
            indices: Vec::new(),
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        PixelMask {
            width,
            height,
            indices: (0..(width * height) as u32).collect(),
        }
    }

    /// Sorts and deduplicates; fails if any index falls outside the image.
    pub fn from_indices(width: usize, height: usize, mut indices: Vec<u32>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last as usize >= width * height {
                return Err(Error::Config(format!(
                    "mask index {last} outside {width}x{height} image"
                )));
            }
        }
        Ok(PixelMask {
            width,
            height,
            indices,
        })
    }

    pub fn from_pixels(
        width: usize,
        height: usize,
        pixels: impl IntoIterator<Item = (u32, u32)>,
    ) -> Result<Self> {
        let mut indices = Vec::new();
        for (u, v) in pixels {
            if u as usize >= width || v as usize >= height {
                return Err(Error::Config(format!(
                    "pixel ({u}, {v}) outside {width}x{height} image"
                )));
            }
            indices.push(v * width as u32 + u);
        }
        PixelMask::from_indices(width, height, indices)
    }

    pub fn from_predicate(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut indices = Vec::new();
        for v in 0..height {
            for u in 0..width {
                if f(u, v) {
                    indices.push((v * width + u) as u32);
                }
            }
        }
        PixelMask {
            width,
            height,
            indices,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    /// `(u, v)` in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.indices
            .iter()
            .map(move |&i| (i as usize % w, i as usize / w))
    }

    pub fn contains_index(&self, idx: u32) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height && self.contains_index((v * self.width + u) as u32)
    }

    pub fn intersection_count(&self, other: &PixelMask) -> usize {
        let (mut a, mut b) = (self.indices.iter().peekable(), other.indices.iter().peekable());
        let mut count = 0;
        while let (Some(&&x), Some(&&y)) = (a.peek(), b.peek()) {
            match x.cmp(&y) {
                std::cmp::Ordering::Less => {
                    a.next();
                }
                std::cmp::Ordering::Greater => {
                    b.next();
                }
                std::cmp::Ordering::Equal => {
                    count += 1;
                    a.next();
                    b.next();
                }
            }
        }
        count
    }

    pub fn intersection(&self, other: &PixelMask) -> PixelMask {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.indices[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        PixelMask {
            width: self.width,
            height: self.height,
            indices: out,
        }
    }

    pub fn union(&self, other: &PixelMask) -> PixelMask {
        let mut out = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.indices.len() || j < other.indices.len() {
            let next = match (self.indices.get(i), other.indices.get(j)) {
                (Some(&a), Some(&b)) if a < b => {
                    i += 1;
                    a
                }
                (Some(&a), Some(&b)) if a > b => {
                    j += 1;
                    b
                }
                (Some(&a), Some(_)) => {
                    i += 1;
                    j += 1;
                    a
                }
                (Some(&a), None) => {
                    i += 1;
                    a
                }
                (None, Some(&b)) => {
                    j += 1;
                    b
                }
                (None, None) => unreachable!(),
            };
            out.push(next);
        }
        PixelMask {
            width: self.width,
            height: self.height,
            indices: out,
        }
    }

    pub fn iou(&self, other: &PixelMask) -> f64 {
        let inter = self.intersection_count(other);
        let union = self.len() + other.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// True if some pixel of `other` lies in the 8-neighborhood dilation of `self`.
    pub fn touches(&self, other: &PixelMask) -> bool {
        if self.is_empty() || other.is_empty() {
            return false;
        }
        let w = self.width as i64;
        let h = self.height as i64;
        other.pixels().any(|(u, v)| {
            (-1i64..=1).any(|dv| {
                (-1i64..=1).any(|du| {
                    let (nu, nv) = (u as i64 + du, v as i64 + dv);
                    nu >= 0
                        && nv >= 0
                        && nu < w
                        && nv < h
                        && self.contains_index((nv * w + nu) as u32)
                })
            })
        })
    }
}

/// Instance-level segmentation: per-pixel instance id (0 = unlabeled) plus a class table.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSegmentation {
    pub width: usize,
    pub height: usize,
    pub ids: Vec<u32>,
    pub classes: BTreeMap<u32, String>,
}

/// Class assigned to instances missing from the class table.
pub const DEFAULT_CLASS: &str = "default";

impl InstanceSegmentation {
    pub fn new(
        width: usize,
        height: usize,
        ids: Vec<u32>,
        classes: BTreeMap<u32, String>,
    ) -> Result<Self> {
        if ids.len() != width * height {
            return Err(Error::Config(format!(
                "segmentation has {} labels, expected {}x{}",
                ids.len(),
                width,
                height
            )));
        }
        Ok(InstanceSegmentation {
            width,
            height,
            ids,
            classes,
        })
    }

    pub fn class_of(&self, id: u32) -> &str {
        self.classes.get(&id).map(String::as_str).unwrap_or(DEFAULT_CLASS)
    }

    /// Masks of every nonzero instance, ascending by id.
    pub fn instance_masks(&self) -> BTreeMap<u32, PixelMask> {
        let mut buckets: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
        for (i, &id) in self.ids.iter().enumerate() {
            if id != 0 {
                buckets.entry(id).or_default().push(i as u32);
            }
        }
        buckets
            .into_iter()
            .map(|(id, indices)| {
                (
                    id,
                    PixelMask {
                        width: self.width,
                        height: self.height,
                        indices,
                    },
                )
            })
            .collect()
    }
}
