//! Deformation vector fields rasterized from a genotype.

use std::path::{Path, PathBuf};

use super::locate::{apply_weights, barycentric_coords, INSIDE_EPS};
use super::{Direction, DualMeshGenotype};
use crate::geometry::Vec3;
use crate::volume::io::{read_pair, write_pair};
use crate::volume::{load_label_mask, save_label_mask, Dtype, Geometry, LabelMask, VolumeHeader};
use crate::{Error, Result};

/// Per-voxel displacement in mm plus a mask of voxels inside the mesh hull.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationVectorField {
    pub geometry: Geometry,
    pub direction: Direction,
    pub displacement: Vec<Vec3>,
    /// 1 where the voxel centre lies inside the from-side mesh.
    pub coverage: Vec<u8>,
}

impl DeformationVectorField {
    pub fn zeros(geometry: Geometry, direction: Direction) -> Self {
        Self {
            geometry,
            direction,
            displacement: vec![Vec3::zeros(); geometry.len()],
            coverage: vec![1; geometry.len()],
        }
    }

    /// Field sampled from a function of the voxel centre; fully covered.
    pub fn from_fn(geometry: Geometry, direction: Direction, mut f: impl FnMut(Vec3) -> Vec3) -> Self {
        let displacement = (0..geometry.len())
            .map(|idx| {
                let [i, j, k] = geometry.unravel(idx);
                f(geometry.world(i, j, k))
            })
            .collect();
        Self {
            geometry,
            direction,
            displacement,
            coverage: vec![1; geometry.len()],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.displacement[self.geometry.index(i, j, k)]
    }

    #[inline]
    pub fn is_covered(&self, idx: usize) -> bool {
        self.coverage[idx] != 0
    }

    pub fn covered_count(&self) -> usize {
        self.coverage.iter().filter(|&&c| c != 0).count()
    }

    pub fn coverage_mask(&self) -> LabelMask {
        LabelMask {
            geometry: self.geometry,
            data: self.coverage.clone(),
            label: "coverage".into(),
        }
    }
}

/// Displacement `T(c) - c` at every voxel centre `c`; voxels outside the
/// from-side hull get zero displacement and coverage 0. Where tets share a
/// face, the lowest tet id wins.
pub fn rasterize_dvf(g: &DualMeshGenotype, direction: Direction, geometry: &Geometry) -> DeformationVectorField {
    let from = direction.from_side();
    let to = from.other();
    let n = geometry.len();
    let mut displacement = vec![Vec3::zeros(); n];
    let mut coverage = vec![0u8; n];
    for t in 0..g.topology.num_tets() {
        let p = g.tet_points(from, t);
        if barycentric_coords(&p, &p[0]).is_err() {
            continue;
        }
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut empty = false;
        for a in 0..3 {
            let mn = p.iter().map(|q| q[a]).fold(f64::INFINITY, f64::min);
            let mx = p.iter().map(|q| q[a]).fold(f64::NEG_INFINITY, f64::max);
            let s = geometry.spacing_mm[a];
            let o = geometry.origin_mm[a];
            let l = ((mn - o) / s - 1e-9).ceil().max(0.0);
            let h = ((mx - o) / s + 1e-9).floor().min((geometry.dims[a] - 1) as f64);
            if h < l {
                empty = true;
                break;
            }
            lo[a] = l as usize;
            hi[a] = h as usize;
        }
        if empty {
            continue;
        }
        let q = g.tet_points(to, t);
        for k in lo[2]..=hi[2] {
            for j in lo[1]..=hi[1] {
                for i in lo[0]..=hi[0] {
                    let idx = geometry.index(i, j, k);
                    if coverage[idx] != 0 {
                        continue;
                    }
                    let c = geometry.world(i, j, k);
                    let Ok(w) = barycentric_coords(&p, &c) else { continue };
                    if w.iter().all(|&x| x >= -INSIDE_EPS) {
                        displacement[idx] = apply_weights(&q, &w) - c;
                        coverage[idx] = 1;
                    }
                }
            }
        }
    }
    DeformationVectorField {
        geometry: *geometry,
        direction,
        displacement,
        coverage,
    }
}

fn coverage_path(path: &Path) -> PathBuf {
    let hp = crate::volume::header_path(path);
    let s = hp.to_string_lossy();
    let base = s.strip_suffix(".vol.json").unwrap_or(&s);
    PathBuf::from(format!("{base}_coverage"))
}

/// Writes the field (`f32x3`) and its `<name>_coverage` u8 sidecar.
pub fn save_dvf(path: impl AsRef<Path>, dvf: &DeformationVectorField) -> Result<()> {
    let path = path.as_ref();
    let mut header = VolumeHeader::new(&dvf.geometry, Dtype::F32x3);
    header.direction = Some(dvf.direction.as_str().into());
    let mut raw = Vec::with_capacity(dvf.displacement.len() * 12);
    for d in &dvf.displacement {
        for a in 0..3 {
            raw.extend_from_slice(&(d[a] as f32).to_le_bytes());
        }
    }
    write_pair(path, &header, &raw)?;
    save_label_mask(coverage_path(path), &dvf.coverage_mask())
}

pub fn load_dvf(path: impl AsRef<Path>) -> Result<DeformationVectorField> {
    let path = path.as_ref();
    let (header, geometry, raw) = read_pair(path)?;
    if header.dtype != Dtype::F32x3 {
        return Err(Error::format(path, "expected an f32x3 payload"));
    }
    let direction = match header.direction.as_deref() {
        Some("forward") | None => Direction::Forward,
        Some("inverse") => Direction::Inverse,
        Some(other) => return Err(Error::format(path, format!("unknown direction {other:?}"))),
    };
    let f = |c: &[u8]| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    let displacement = raw
        .chunks_exact(12)
        .map(|c| Vec3::new(f(&c[0..4]), f(&c[4..8]), f(&c[8..12])))
        .collect();
    let cov = load_label_mask(coverage_path(path))?;
    geometry.ensure_same(&cov.geometry)?;
    Ok(DeformationVectorField {
        geometry,
        direction,
        displacement,
        coverage: cov.data,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::TetTopology;

    /// Cube [0, 4]^3 split into six tets around the main diagonal.
    fn cube() -> DualMeshGenotype {
        let mut pts = Vec::new();
        for k in 0..2 {
            for j in 0..2 {
                for i in 0..2 {
                    pts.push(Vec3::new(4.0 * i as f64, 4.0 * j as f64, 4.0 * k as f64));
                }
            }
        }
        let paths = [[1, 3], [1, 5], [2, 3], [2, 6], [4, 5], [4, 6]];
        let tets = paths
            .iter()
            .map(|&[a, b]| {
                let mut t = [0u32, a, b, 7];
                let p = |i: u32| pts[i as usize];
                if crate::mesh::tet_signed_volume(&[p(t[0]), p(t[1]), p(t[2]), p(t[3])]) < 0.0 {
                    t.swap(1, 2);
                }
                t
            })
            .collect();
        let topo = Arc::new(TetTopology::new(8, tets).unwrap());
        DualMeshGenotype::identity(topo, pts).unwrap()
    }

    fn grid() -> Geometry {
        Geometry::new([6, 6, 6], [1.0; 3], [0.0; 3]).unwrap()
    }

    #[test]
    fn identity_is_zero_with_hull_coverage() {
        let g = cube();
        let dvf = rasterize_dvf(&g, Direction::Forward, &grid());
        assert!(dvf.displacement.iter().all(|d| *d == Vec3::zeros()));
        assert_eq!(dvf.covered_count(), 125);
        assert!(!dvf.is_covered(grid().index(5, 0, 0)));
    }

    #[test]
    fn affine_motion_is_reproduced() {
        let mut g = cube();
        let a = nalgebra::Matrix3::new(1.05, 0.02, 0.0, -0.01, 0.97, 0.03, 0.0, 0.01, 1.1);
        let b = Vec3::new(0.3, -0.2, 0.5);
        for p in g.target.iter_mut() {
            *p = a * *p + b;
        }
        let geo = grid();
        let dvf = rasterize_dvf(&g, Direction::Forward, &geo);
        for idx in 0..geo.len() {
            if dvf.is_covered(idx) {
                let [i, j, k] = geo.unravel(idx);
                let c = geo.world(i, j, k);
                assert!((dvf.displacement[idx] - (a * c + b - c)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let geo = grid();
        let dvf = DeformationVectorField::from_fn(geo, Direction::Inverse, |c| Vec3::new(0.5, c.x * 0.25, -1.0));
        let path = dir.path().join("inv");
        save_dvf(&path, &dvf).unwrap();
        let back = load_dvf(&path).unwrap();
        assert_eq!(back, dvf);
        assert!(dir.path().join("inv_coverage.vol.json").exists());
    }
}
