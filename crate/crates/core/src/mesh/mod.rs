//! Dual-dynamic tetrahedral mesh: one topology, two coordinate sets.
//!
//! The source-side and target-side coordinates of a point are corresponding
//! positions, so every tetrahedron maps linearly between the two images. The
//! forward transform takes source positions to target positions through the
//! containing source-side tetrahedron; the inverse does the reverse.

mod dvf;
mod folds;
mod io;
mod locate;

use std::collections::HashMap;
use std::sync::Arc;

pub use dvf::{load_dvf, rasterize_dvf, save_dvf, DeformationVectorField};
pub use folds::{detect_folds, detect_folds_in, is_violation, Fold, ReferenceSigns};
pub use io::{load_genotype, save_genotype};
pub use locate::{barycentric_coords, locate_point, locate_point_brute_force, transform_point, Locator};

use crate::geometry::Vec3;
use crate::{Error, Result};

pub const NO_NEIGHBOR: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Source,
    Target,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Source => Side::Target,
            Side::Target => Side::Source,
        }
    }

    pub const BOTH: [Side; 2] = [Side::Source, Side::Target];
}

/// Forward maps source to target, inverse maps target to source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    /// Side whose mesh is searched for the containing tetrahedron.
    pub fn from_side(self) -> Side {
        match self {
            Direction::Forward => Side::Source,
            Direction::Inverse => Side::Target,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        }
    }
}

/// One of the ten edges measured per tetrahedron.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TetEdge {
    /// Vertex-vertex edge between two local vertex indices.
    Pair(usize, usize),
    /// Vertex to the centroid of its opposite face.
    Spoke(usize),
}

pub const TET_EDGES: [TetEdge; 10] = [
    TetEdge::Pair(0, 1),
    TetEdge::Pair(0, 2),
    TetEdge::Pair(0, 3),
    TetEdge::Pair(1, 2),
    TetEdge::Pair(1, 3),
    TetEdge::Pair(2, 3),
    TetEdge::Spoke(0),
    TetEdge::Spoke(1),
    TetEdge::Spoke(2),
    TetEdge::Spoke(3),
];

impl TetEdge {
    #[inline]
    pub fn length(self, p: &[Vec3; 4]) -> f64 {
        match self {
            TetEdge::Pair(a, b) => (p[a] - p[b]).norm(),
            TetEdge::Spoke(i) => {
                let mut c = Vec3::zeros();
                for (j, q) in p.iter().enumerate() {
                    if j != i {
                        c += q;
                    }
                }
                (p[i] - c / 3.0).norm()
            }
        }
    }
}

/// (1/6) det[p1 - p0, p2 - p0, p3 - p0].
#[inline]
pub fn signed_volume(p0: &Vec3, p1: &Vec3, p2: &Vec3, p3: &Vec3) -> f64 {
    let a = p1 - p0;
    let b = p2 - p0;
    let c = p3 - p0;
    a.dot(&b.cross(&c)) / 6.0
}

#[inline]
pub fn tet_signed_volume(p: &[Vec3; 4]) -> f64 {
    signed_volume(&p[0], &p[1], &p[2], &p[3])
}

/// Tetrahedral connectivity shared by both meshes of a genotype.
#[derive(Debug, Clone, PartialEq)]
pub struct TetTopology {
    num_points: usize,
    tets: Vec<[u32; 4]>,
    incident: Vec<Vec<u32>>,
    neighbors: Vec<[u32; 4]>,
    edges: Vec<[u32; 2]>,
}

impl TetTopology {
    pub fn new(num_points: usize, tets: Vec<[u32; 4]>) -> Result<Self> {
        let mut incident = vec![Vec::new(); num_points];
        for (t, tet) in tets.iter().enumerate() {
            for (a, &v) in tet.iter().enumerate() {
                if v as usize >= num_points {
                    return Err(Error::InvalidParameter(format!(
                        "tet {t} references point {v} of {num_points}"
                    )));
                }
                if tet[..a].contains(&v) {
                    return Err(Error::InvalidParameter(format!("tet {t} repeats vertex {v}")));
                }
                incident[v as usize].push(t as u32);
            }
        }

        let mut faces: HashMap<[u32; 3], (u32, u8)> = HashMap::with_capacity(tets.len() * 2);
        let mut neighbors = vec![[NO_NEIGHBOR; 4]; tets.len()];
        for (t, tet) in tets.iter().enumerate() {
            for i in 0..4 {
                let key = face_key(tet, i);
                if let Some((u, j)) = faces.remove(&key) {
                    neighbors[t][i] = u;
                    neighbors[u as usize][j as usize] = t as u32;
                } else {
                    faces.insert(key, (t as u32, i as u8));
                }
            }
        }

        let mut edges: Vec<[u32; 2]> = tets
            .iter()
            .flat_map(|t| {
                TET_EDGES.iter().filter_map(move |e| match *e {
                    TetEdge::Pair(a, b) => Some([t[a].min(t[b]), t[a].max(t[b])]),
                    TetEdge::Spoke(_) => None,
                })
            })
            .collect();
        edges.sort_unstable();
        edges.dedup();

        Ok(Self {
            num_points,
            tets,
            incident,
            neighbors,
            edges,
        })
    }

    #[inline]
    pub fn num_points(&self) -> usize {
        self.num_points
    }

    #[inline]
    pub fn num_tets(&self) -> usize {
        self.tets.len()
    }

    #[inline]
    pub fn tets(&self) -> &[[u32; 4]] {
        &self.tets
    }

    #[inline]
    pub fn tet(&self, t: usize) -> [u32; 4] {
        self.tets[t]
    }

    /// Tets using point `p`, ascending.
    #[inline]
    pub fn incident_tets(&self, p: usize) -> &[u32] {
        &self.incident[p]
    }

    /// Neighbour across the face opposite local vertex `i`, if any.
    #[inline]
    pub fn neighbor(&self, t: usize, i: usize) -> Option<usize> {
        let n = self.neighbors[t][i];
        (n != NO_NEIGHBOR).then_some(n as usize)
    }

    /// Unique vertex-vertex edges, sorted; the index is the edge id.
    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }

    /// The ten measured edges of every tetrahedron.
    pub fn edges_per_tet(&self) -> &'static [TetEdge; 10] {
        &TET_EDGES
    }
}

fn face_key(tet: &[u32; 4], skip: usize) -> [u32; 3] {
    let mut f = [0u32; 3];
    let mut n = 0;
    for (i, &v) in tet.iter().enumerate() {
        if i != skip {
            f[n] = v;
            n += 1;
        }
    }
    f.sort_unstable();
    f
}

/// Solution encoding: shared topology plus source and target coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMeshGenotype {
    pub topology: Arc<TetTopology>,
    pub source: Vec<Vec3>,
    pub target: Vec<Vec3>,
}

impl DualMeshGenotype {
    pub fn new(topology: Arc<TetTopology>, source: Vec<Vec3>, target: Vec<Vec3>) -> Result<Self> {
        if source.len() != topology.num_points() || target.len() != topology.num_points() {
            return Err(Error::InvalidParameter(format!(
                "coordinate counts {}/{} do not match {} points",
                source.len(),
                target.len(),
                topology.num_points()
            )));
        }
        Ok(Self {
            topology,
            source,
            target,
        })
    }

    /// Identity transform: both meshes at the same coordinates.
    pub fn identity(topology: Arc<TetTopology>, points: Vec<Vec3>) -> Result<Self> {
        Self::new(topology, points.clone(), points)
    }

    pub fn num_points(&self) -> usize {
        self.source.len()
    }

    /// Decision variables: three coordinates per point on each mesh.
    pub fn num_variables(&self) -> usize {
        6 * self.num_points()
    }

    #[inline]
    pub fn coords(&self, side: Side) -> &[Vec3] {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }

    #[inline]
    pub fn coords_mut(&mut self, side: Side) -> &mut [Vec3] {
        match side {
            Side::Source => &mut self.source,
            Side::Target => &mut self.target,
        }
    }

    #[inline]
    pub fn tet_points(&self, side: Side, t: usize) -> [Vec3; 4] {
        let c = self.coords(side);
        let v = self.topology.tets[t];
        [
            c[v[0] as usize],
            c[v[1] as usize],
            c[v[2] as usize],
            c[v[3] as usize],
        ]
    }

    #[inline]
    pub fn tet_volume(&self, side: Side, t: usize) -> f64 {
        tet_signed_volume(&self.tet_points(side, t))
    }
}
