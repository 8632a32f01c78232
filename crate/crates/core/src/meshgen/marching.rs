//! Marching cubes over a binary mask.

use std::collections::HashMap;

use super::tables::TRIANGLE_TABLE;
use crate::geometry::Vec3;
use crate::volume::LabelMask;
use crate::{Error, Result};

/// Corner offsets in table order.
const CORNERS: [[i64; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Corner pairs per cube edge in table order.
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl SurfaceMesh {
    /// Unique undirected edges.
    pub fn edge_count(&self) -> usize {
        self.edge_use().len()
    }

    fn edge_use(&self) -> HashMap<(u32, u32), usize> {
        let mut m = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// V - E + F.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Every edge shared by exactly two triangles.
    pub fn is_closed(&self) -> bool {
        self.edge_use().values().all(|&n| n == 2)
    }
}

/// Iso-surface of the mask's indicator field; voxels beyond the grid count
/// as background so objects touching the border still close.
pub fn marching_cubes(mask: &LabelMask, iso: f64) -> Result<SurfaceMesh> {
    if mask.count() == 0 {
        return Err(Error::Empty(format!("mask {:?} has no foreground", mask.label)));
    }
    let g = &mask.geometry;
    let d = [g.dims[0] as i64, g.dims[1] as i64, g.dims[2] as i64];
    let value = |p: [i64; 3]| -> f64 {
        if (0..3).all(|a| p[a] >= 0 && p[a] < d[a]) {
            f64::from(mask.data[g.index(p[0] as usize, p[1] as usize, p[2] as usize)])
        } else {
            0.0
        }
    };
    let world = |p: [i64; 3]| -> Vec3 {
        Vec3::new(
            g.origin_mm[0] + p[0] as f64 * g.spacing_mm[0],
            g.origin_mm[1] + p[1] as f64 * g.spacing_mm[1],
            g.origin_mm[2] + p[2] as f64 * g.spacing_mm[2],
        )
    };

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut welded: HashMap<([i64; 3], usize), u32> = HashMap::new();
    for z in -1..d[2] {
        for y in -1..d[1] {
            for x in -1..d[0] {
                let mut vals = [0.0; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    vals[c] = value([x + off[0], y + off[1], z + off[2]]);
                    if vals[c] < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRIANGLE_TABLE[case];
                let mut ids = [0u32; 3];
                for (n, &e) in row.iter().take_while(|&&e| e >= 0).enumerate() {
                    let [c0, c1] = EDGES[e as usize];
                    let p0 = [x + CORNERS[c0][0], y + CORNERS[c0][1], z + CORNERS[c0][2]];
                    let p1 = [x + CORNERS[c1][0], y + CORNERS[c1][1], z + CORNERS[c1][2]];
                    let (lo, hi, vlo, vhi) = if p0 <= p1 {
                        (p0, p1, vals[c0], vals[c1])
                    } else {
                        (p1, p0, vals[c1], vals[c0])
                    };
                    let axis = (0..3).find(|&a| lo[a] != hi[a]).expect("edge spans one axis");
                    let id = *welded.entry((lo, axis)).or_insert_with(|| {
                        let t = (iso - vlo) / (vhi - vlo);
                        let a = world(lo);
                        vertices.push(a + (world(hi) - a) * t);
                        (vertices.len() - 1) as u32
                    });
                    ids[n % 3] = id;
                    if n % 3 == 2 {
                        let [a, b, c] = ids;
                        let area2 = (vertices[b as usize] - vertices[a as usize])
                            .cross(&(vertices[c as usize] - vertices[a as usize]))
                            .norm();
                        if a != b && b != c && a != c && area2 > 0.0 {
                            triangles.push(ids);
                        }
                    }
                }
            }
        }
    }
    Ok(SurfaceMesh {
        vertices,
        triangles,
    })
}
