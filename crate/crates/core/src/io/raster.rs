use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use png::{BitDepth, ColorType, Transformations};

use super::json::{load_json, save_json};
use crate::error::{Error, Result};
use crate::geometry::{DepthMap, InstanceSegmentation};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', b'\r', b'\n', 0x1a, b'\n'];

/// Magic bytes of the raw float depth format.
pub const RAW_DEPTH_MAGIC: [u8; 8] = *b"PKDEPTH1";

/// Integer depth encoding: `stored = round(depth · scale)`, with `invalid_value` for
/// missing pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthEncoding {
    pub scale: f64,
    pub invalid_value: u16,
}

impl Default for DepthEncoding {
    fn default() -> Self {
        DepthEncoding {
            scale: 1000.0,
            invalid_value: 0,
        }
    }
}

impl DepthEncoding {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::Config(format!(
                "depth scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// Single-channel PNG raster widened to `u32`.
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub bit_depth: u8,
    pub values: Vec<u32>,
}

pub fn read_gray_png(path: &Path) -> Result<GrayImage> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::format(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, e.to_string()))?;
    if info.color_type != ColorType::Grayscale {
        return Err(Error::format(
            path,
            format!("expected a single-channel image, found {:?}", info.color_type),
        ));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let (bit_depth, values) = match info.bit_depth {
        BitDepth::Eight => (
            8,
            (0..height)
                .flat_map(|v| buf[v * info.line_size..][..width].iter().map(|&b| b as u32))
                .collect(),
        ),
        BitDepth::Sixteen => (
            16,
            (0..height)
                .flat_map(|v| {
                    buf[v * info.line_size..][..2 * width]
                        .chunks_exact(2)
                        .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                })
                .collect(),
        ),
        other => {
            return Err(Error::format(
                path,
                format!("unsupported bit depth {other:?}, expected 8 or 16"),
            ))
        }
    };
    Ok(GrayImage {
        width,
        height,
        bit_depth,
        values,
    })
}

/// Writes an 8-bit image when every value fits, else 16-bit.
pub fn write_gray_png(path: &Path, width: usize, height: usize, values: &[u32]) -> Result<()> {
    let max = values.iter().copied().max().unwrap_or(0);
    if max > u16::MAX as u32 {
        return Err(Error::Domain(format!(
            "value {max} does not fit a 16-bit image"
        )));
    }
    let (depth, bytes): (BitDepth, Vec<u8>) = if max <= u8::MAX as u32 {
        (BitDepth::Eight, values.iter().map(|&v| v as u8).collect())
    } else {
        (
            BitDepth::Sixteen,
            values.iter().flat_map(|&v| (v as u16).to_be_bytes()).collect(),
        )
    };
    write_png(path, width, height, depth, &bytes)
}

fn write_png(path: &Path, width: usize, height: usize, depth: BitDepth, bytes: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(ColorType::Grayscale);
    encoder.set_depth(depth);
    let to_err = |e: png::EncodingError| Error::format(path, e.to_string());
    let mut writer = encoder.write_header().map_err(to_err)?;
    writer.write_image_data(bytes).map_err(to_err)?;
    writer.finish().map_err(to_err)
}

/// Loads a 16-bit PNG (scaled integers) or a raw float depth file, detected by content.
pub fn load_depth(path: &Path, enc: &DepthEncoding) -> Result<DepthMap> {
    enc.validate()?;
    let mut head = [0u8; 8];
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    file.read_exact(&mut head)
        .map_err(|_| Error::format(path, "file too short for a depth map"))?;
    drop(file);
    if head == PNG_SIGNATURE {
        let img = read_gray_png(path)?;
        if img.bit_depth != 16 {
            return Err(Error::format(path, "depth PNG must be 16-bit"));
        }
        let mut depth = DepthMap::invalid(img.width, img.height);
        for (i, &v) in img.values.iter().enumerate() {
            if v != enc.invalid_value as u32 {
                depth.set_index(i, v as f64 / enc.scale);
            }
        }
        Ok(depth)
    } else if head == RAW_DEPTH_MAGIC {
        load_depth_raw(path)
    } else {
        Err(Error::format(path, "neither a PNG nor a raw depth file"))
    }
}

fn load_depth_raw(path: &Path) -> Result<DepthMap> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = RAW_DEPTH_MAGIC.len() + 8;
    if bytes.len() < header {
        return Err(Error::format(path, "truncated header"));
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (width, height) = (dim(8), dim(12));
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(header));
    if expected != Some(bytes.len()) {
        return Err(Error::format(
            path,
            format!("{} bytes do not hold a {width}x{height} float raster", bytes.len()),
        ));
    }
    let mut depth = DepthMap::invalid(width, height);
    for (i, c) in bytes[header..].chunks_exact(4).enumerate() {
        let z = f32::from_le_bytes(c.try_into().unwrap());
        if z.is_finite() && z > 0.0 {
            depth.set_index(i, z as f64);
        }
    }
    Ok(depth)
}

/// Raw layout: magic, width and height as little-endian `u32`, then row-major
/// little-endian `f32` values with NaN for invalid pixels.
pub fn save_depth_raw(path: &Path, depth: &DepthMap) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 4 * depth.values().len());
    out.extend_from_slice(&RAW_DEPTH_MAGIC);
    out.extend_from_slice(&(depth.width() as u32).to_le_bytes());
    out.extend_from_slice(&(depth.height() as u32).to_le_bytes());
    for i in 0..depth.values().len() {
        let z = depth.get_index(i).map_or(f32::NAN, |z| z as f32);
        out.extend_from_slice(&z.to_le_bytes());
    }
    write_bytes(path, &out)
}

pub fn save_depth_png(path: &Path, depth: &DepthMap, enc: &DepthEncoding) -> Result<()> {
    enc.validate()?;
    let mut bytes = Vec::with_capacity(2 * depth.values().len());
    for i in 0..depth.values().len() {
        let stored = match depth.get_index(i) {
            None => enc.invalid_value,
            Some(z) => {
                let q = (z * enc.scale).round();
                if !(1.0..=u16::MAX as f64).contains(&q) || q as u16 == enc.invalid_value {
                    return Err(Error::Domain(format!(
                        "depth {z} m is not representable at scale {}",
                        enc.scale
                    )));
                }
                q as u16
            }
        };
        bytes.extend_from_slice(&stored.to_be_bytes());
    }
    write_png(path, depth.width(), depth.height(), BitDepth::Sixteen, &bytes)
}

/// PNG for a `.png` extension, the raw float format otherwise.
pub fn save_depth(path: &Path, depth: &DepthMap, enc: &DepthEncoding) -> Result<()> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")) {
        save_depth_png(path, depth, enc)
    } else {
        save_depth_raw(path, depth)
    }
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    f.write_all(bytes)
        .and_then(|_| f.flush())
        .map_err(|e| Error::io(path, e))
}

/// Loads an indexed instance PNG and its `{"id": "class"}` table.
///
/// Instances missing from the table get the default class (with a warning).
pub fn load_segmentation(mask_path: &Path, table_path: Option<&Path>) -> Result<InstanceSegmentation> {
    let img = read_gray_png(mask_path)?;
    let mut classes = BTreeMap::new();
    if let Some(table_path) = table_path {
        let table: BTreeMap<String, String> = load_json(table_path)?;
        for (key, class) in table {
            let id: u32 = key.parse().map_err(|_| {
                Error::format(table_path, format!("instance id {key:?} is not an integer"))
            })?;
            classes.insert(id, class);
        }
    }
    let seg = InstanceSegmentation::new(img.width, img.height, img.values, classes)?;
    let missing: Vec<u32> = seg
        .instance_masks()
        .keys()
        .copied()
        .filter(|id| !seg.classes.contains_key(id))
        .collect();
    if !missing.is_empty() {
        log::warn!(
            "{}: instances {missing:?} have no class entry, using \"default\"",
            mask_path.display()
        );
    }
    Ok(seg)
}

pub fn save_segmentation(mask_path: &Path, table_path: &Path, seg: &InstanceSegmentation) -> Result<()> {
    write_gray_png(mask_path, seg.width, seg.height, &seg.ids)?;
    let table: BTreeMap<String, &String> =
        seg.classes.iter().map(|(id, c)| (id.to_string(), c)).collect();
    save_json(table_path, &table)
}
