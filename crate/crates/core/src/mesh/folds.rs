//! Sign-change fold detection against the initial configuration.

use rayon::prelude::*;

use super::{DualMeshGenotype, Side};
use crate::{Error, Result};

/// Orientation of every tet in the initial mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSigns {
    signs: Vec<i8>,
}

impl ReferenceSigns {
    /// Signs of the source-side volumes; fails on any zero-volume tet.
    pub fn from_genotype(g: &DualMeshGenotype) -> Result<Self> {
        Self::from_side(g, Side::Source)
    }

    pub fn from_side(g: &DualMeshGenotype, side: Side) -> Result<Self> {
        let signs = (0..g.topology.num_tets())
            .map(|t| {
                let v = g.tet_volume(side, t);
                if v > 0.0 {
                    Ok(1)
                } else if v < 0.0 {
                    Ok(-1)
                } else {
                    Err(Error::DegenerateTet(v))
                }
            })
            .collect::<Result<Vec<i8>>>()?;
        Ok(Self { signs })
    }

    pub fn from_signs(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::InvalidParameter("reference signs must be ±1".into()));
        }
        Ok(Self { signs })
    }

    #[inline]
    pub fn sign(&self, t: usize) -> i8 {
        self.signs[t]
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }
}

/// A tet whose orientation disagrees with its reference sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fold {
    pub tet: usize,
    /// Absolute signed volume of the violating tet.
    pub severity: f64,
}

/// Zero volume counts as a violation.
#[inline]
pub fn is_violation(volume: f64, sign: i8) -> bool {
    match sign {
        1 => !(volume > 0.0),
        _ => !(volume < 0.0),
    }
}

#[inline]
fn check(g: &DualMeshGenotype, side: Side, refs: &ReferenceSigns, t: usize) -> Option<Fold> {
    let v = g.tet_volume(side, t);
    is_violation(v, refs.sign(t)).then(|| Fold {
        tet: t,
        severity: v.abs(),
    })
}

const PAR_CHUNK: usize = 1024;

/// Every violating tet of one side, ascending tet id.
pub fn detect_folds(g: &DualMeshGenotype, side: Side, refs: &ReferenceSigns) -> Vec<Fold> {
    let n = g.topology.num_tets();
    if n <= PAR_CHUNK {
        return (0..n).filter_map(|t| check(g, side, refs, t)).collect();
    }
    let ids: Vec<usize> = (0..n).collect();
    ids.par_chunks(PAR_CHUNK)
        .map(|c| c.iter().filter_map(|&t| check(g, side, refs, t)).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .concat()
}

/// Violations restricted to the given tets, in iteration order.
pub fn detect_folds_in(
    g: &DualMeshGenotype,
    side: Side,
    refs: &ReferenceSigns,
    tets: impl IntoIterator<Item = usize>,
) -> Vec<Fold> {
    tets.into_iter().filter_map(|t| check(g, side, refs, t)).collect()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::Vec3;
    use crate::mesh::{tet_signed_volume, TetTopology};

    /// Octahedron split around a centre point: 8 tets incident to point 6.
    fn star() -> DualMeshGenotype {
        let pts = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(0.0, 0.0, 0.0),
        ];
        let mut tets = Vec::new();
        for &x in &[0u32, 1] {
            for &y in &[2u32, 3] {
                for &z in &[4u32, 5] {
                    let mut t = [6, x, y, z];
                    let p = |i: u32| pts[i as usize];
                    if tet_signed_volume(&[p(t[0]), p(t[1]), p(t[2]), p(t[3])]) < 0.0 {
                        t.swap(2, 3);
                    }
                    tets.push(t);
                }
            }
        }
        let topo = Arc::new(TetTopology::new(7, tets).unwrap());
        DualMeshGenotype::identity(topo, pts).unwrap()
    }

    #[test]
    fn initial_mesh_is_fold_free() {
        let g = star();
        let refs = ReferenceSigns::from_genotype(&g).unwrap();
        assert!(detect_folds(&g, Side::Source, &refs).is_empty());
        assert!(detect_folds(&g, Side::Target, &refs).is_empty());
    }

    #[test]
    fn centre_pushed_through_face_folds_incident_tets() {
        let mut g = star();
        let refs = ReferenceSigns::from_genotype(&g).unwrap();
        // beyond the face (x, y, z) = (1,0,0),(0,1,0),(0,0,1)
        g.target[6] = Vec3::new(0.6, 0.6, 0.6);
        let folds = detect_folds(&g, Side::Target, &refs);
        assert!(!folds.is_empty());
        for f in &folds {
            assert!(g.topology.tet(f.tet).contains(&6));
            assert_eq!(f.severity, g.tet_volume(Side::Target, f.tet).abs());
        }
        assert!(detect_folds(&g, Side::Source, &refs).is_empty());
    }

    #[test]
    fn zero_volume_is_violation() {
        assert!(is_violation(0.0, 1));
        assert!(is_violation(0.0, -1));
        assert!(!is_violation(1e-300, 1));
        assert!(is_violation(-1e-300, 1));
        let mut g = star();
        let refs = ReferenceSigns::from_genotype(&g).unwrap();
        g.target[6] = Vec3::new(1.0, 0.0, 0.0);
        let folds = detect_folds_in(&g, Side::Target, &refs, 0..8);
        assert!(folds.iter().any(|f| f.severity == 0.0));
    }
}
