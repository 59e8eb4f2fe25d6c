use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::Vector3;

use super::camera::CameraIntrinsics;
use crate::fitting::PlaneAnnotation;

/// Triangle mesh with one RGB color per vertex.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vector3<f64>>,
    pub colors: Vec<[u8; 3]>,
    pub faces: Vec<[u32; 3]>,
}

impl Mesh {
    /// ASCII PLY with `x y z red green blue` vertices and triangle faces.
    pub fn to_ply(&self) -> String {
        let mut out = String::new();
        out.push_str("ply\nformat ascii 1.0\ncomment planekit plane mesh\n");
        let _ = writeln!(out, "element vertex {}", self.vertices.len());
        out.push_str(
            "property double x\nproperty double y\nproperty double z\n\
             property uchar red\nproperty uchar green\nproperty uchar blue\n",
        );
        let _ = writeln!(out, "element face {}", self.faces.len());
        out.push_str("property list uchar int vertex_indices\nend_header\n");
        for (p, c) in self.vertices.iter().zip(&self.colors) {
            let _ = writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]);
        }
        for f in &self.faces {
            let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
        }
        out
    }
}

/// Distinct, deterministic color for plane `index` (golden-angle hue walk).
pub fn plane_color(index: usize) -> [u8; 3] {
    let hue = (index as f64 * 0.618_033_988_749_895).fract() * 6.0;
    let x = 1.0 - (hue % 2.0 - 1.0).abs();
    let (r, g, b) = match hue as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let scale = |c: f64| (55.0 + 200.0 * c).round() as u8;
    [scale(r), scale(g), scale(b)]
}

/// One vertex per mask pixel at planar depth (row-major, planes in annotation order) and
/// two triangles per 2x2 block of mask pixels.
pub fn export_mesh(annotation: &PlaneAnnotation, k: &CameraIntrinsics) -> Mesh {
    let mut mesh = Mesh::default();
    for (plane_index, instance) in annotation.planes.iter().enumerate() {
        let color = plane_color(plane_index);
        let mut vertex_of: HashMap<(usize, usize), u32> = HashMap::new();
        for (u, v) in instance.mask.pixels() {
            if let Some(z) = instance.plane.depth_at(k, u as f64, v as f64) {
                vertex_of.insert((u, v), mesh.vertices.len() as u32);
                mesh.vertices.push(k.ray(u as f64, v as f64) * z);
                mesh.colors.push(color);
            }
        }
        for (u, v) in instance.mask.pixels() {
            let corners = (
                vertex_of.get(&(u, v)),
                vertex_of.get(&(u + 1, v)),
                vertex_of.get(&(u, v + 1)),
                vertex_of.get(&(u + 1, v + 1)),
            );
            if let (Some(&a), Some(&b), Some(&c), Some(&d)) = corners {
                mesh.faces.push([a, c, b]);
                mesh.faces.push([b, c, d]);
            }
        }
    }
    mesh
}
