//! Gaussian point-resampling repair of folded tetrahedra.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{Aabb, Vec3};
use crate::mesh::{is_violation, tet_signed_volume, DualMeshGenotype, ReferenceSigns, Side, TetTopology};

/// Read/write access to the point coordinates of a dual mesh.
pub trait PointView {
    fn topology(&self) -> &TetTopology;
    fn point(&self, side: Side, p: usize) -> Vec3;
    fn set_point(&mut self, side: Side, p: usize, v: Vec3);

    fn tet_points(&self, side: Side, t: usize) -> [Vec3; 4] {
        self.topology().tet(t).map(|p| self.point(side, p as usize))
    }
}

impl PointView for DualMeshGenotype {
    fn topology(&self) -> &TetTopology {
        &self.topology
    }

    fn point(&self, side: Side, p: usize) -> Vec3 {
        self.coords(side)[p]
    }

    fn set_point(&mut self, side: Side, p: usize, v: Vec3) {
        self.coords_mut(side)[p] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairMethod {
    Gaussian,
    None,
}

impl std::str::FromStr for RepairMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "none" => Ok(Self::None),
            _ => Err(crate::Error::Config(format!("unknown repair method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepairOutcome {
    /// Nothing was folded.
    NoOp,
    /// At least one point moved to a strictly better position.
    Improved { moved: usize, aborted: usize },
    /// Every sample deteriorated for every point.
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepairConfig {
    pub samples: usize,
    /// σ as a fraction of the distance to the surrounding polygon.
    pub sigma_scale: f64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        Self {
            samples: 64,
            sigma_scale: 0.5,
        }
    }
}

/// Summed violation severity of the tets incident to `p` on `side`.
pub fn point_severity(view: &impl PointView, side: Side, refs: &ReferenceSigns, p: usize) -> f64 {
    view.topology()
        .incident_tets(p)
        .iter()
        .map(|&t| {
            let v = tet_signed_volume(&view.tet_points(side, t as usize));
            if is_violation(v, refs.sign(t as usize)) {
                v.abs()
            } else {
                0.0
            }
        })
        .sum()
}

fn incident_violation(view: &impl PointView, side: Side, refs: &ReferenceSigns, p: usize) -> bool {
    view.topology().incident_tets(p).iter().any(|&t| {
        is_violation(tet_signed_volume(&view.tet_points(side, t as usize)), refs.sign(t as usize))
    })
}

fn plane_distance(q: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        (q - a).dot(&n).abs() / len
    } else {
        f64::INFINITY
    }
}

/// Distance from `p` to the nearest face opposite it among its incident
/// tets, preferring tets that respect their reference sign.
pub fn surrounding_distance(view: &impl PointView, side: Side, refs: &ReferenceSigns, p: usize) -> f64 {
    let q = view.point(side, p);
    let faces = |respecting: bool| {
        view.topology()
            .incident_tets(p)
            .iter()
            .filter_map(|&t| {
                let t = t as usize;
                let pts = view.tet_points(side, t);
                let ok = !is_violation(tet_signed_volume(&pts), refs.sign(t));
                if respecting && !ok {
                    return None;
                }
                let local = view.topology().tet(t).iter().position(|&v| v as usize == p)?;
                let f: Vec<Vec3> = (0..4).filter(|&i| i != local).map(|i| pts[i]).collect();
                Some(plane_distance(&q, &f[0], &f[1], &f[2]))
            })
            .fold(f64::INFINITY, f64::min)
    };
    let d = faces(true);
    if d.is_finite() {
        d
    } else {
        faces(false)
    }
}

/// Resamples each candidate point that touches a violating tet, in the
/// given order and per side. Every point keeps its position unless one of
/// the Gaussian samples strictly lowers its incident severity.
pub fn repair_points(
    view: &mut impl PointView,
    refs: &ReferenceSigns,
    candidates: &[usize],
    bounds: Option<&Aabb>,
    cfg: &RepairConfig,
    rng: &mut impl Rng,
) -> RepairOutcome {
    let mut moved = 0;
    let mut aborted = 0;
    for side in Side::BOTH {
        for &p in candidates {
            if !incident_violation(view, side, refs, p) {
                continue;
            }
            let before = point_severity(view, side, refs, p);
            let sigma = cfg.sigma_scale * surrounding_distance(view, side, refs, p);
            let origin = view.point(side, p);
            let mut best = (before, origin);
            if sigma.is_finite() && sigma > 0.0 {
                for _ in 0..cfg.samples {
                    let off = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                    let mut x = origin + off * sigma;
                    if let Some(b) = bounds {
                        for a in 0..3 {
                            x[a] = x[a].clamp(b.min[a], b.max[a]);
                        }
                    }
                    view.set_point(side, p, x);
                    let s = point_severity(view, side, refs, p);
                    if s < best.0 {
                        best = (s, x);
                    }
                }
            }
            view.set_point(side, p, best.1);
            if best.0 < before {
                moved += 1;
            } else {
                aborted += 1;
            }
        }
    }
    match (moved, aborted) {
        (0, 0) => RepairOutcome::NoOp,
        (0, _) => RepairOutcome::Aborted,
        (moved, aborted) => RepairOutcome::Improved { moved, aborted },
    }
}

/// Repairs every non-pinned point of every violating tet, ascending id.
pub fn repair(
    g: &mut DualMeshGenotype,
    refs: &ReferenceSigns,
    pinned: impl Fn(usize) -> bool,
    bounds: Option<&Aabb>,
    cfg: &RepairConfig,
    rng: &mut impl Rng,
) -> RepairOutcome {
    let mut pts: Vec<usize> = Side::BOTH
        .into_iter()
        .flat_map(|side| crate::mesh::detect_folds(g, side, refs))
        .flat_map(|f| g.topology.tet(f.tet))
        .map(|p| p as usize)
        .filter(|&p| !pinned(p))
        .collect();
    pts.sort_unstable();
    pts.dedup();
    repair_points(g, refs, &pts, bounds, cfg, rng)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::mesh::detect_folds;

    fn star() -> DualMeshGenotype {
        let pts = vec![
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::zeros(),
        ];
        let mut tets = Vec::new();
        for &x in &[0u32, 1] {
            for &y in &[2u32, 3] {
                for &z in &[4u32, 5] {
                    tets.push([x, y, z, 6]);
                }
            }
        }
        DualMeshGenotype::identity(Arc::new(TetTopology::new(7, tets).unwrap()), pts).unwrap()
    }

    fn total(g: &DualMeshGenotype, refs: &ReferenceSigns) -> f64 {
        Side::BOTH
            .into_iter()
            .flat_map(|s| detect_folds(g, s, refs))
            .map(|f| f.severity)
            .sum()
    }

    #[test]
    fn fold_free_is_noop() {
        let mut g = star();
        let refs = ReferenceSigns::from_genotype(&g).unwrap();
        let before = g.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(repair(&mut g, &refs, |_| false, None, &RepairConfig::default(), &mut rng), RepairOutcome::NoOp);
        assert_eq!(g, before);
    }

    #[test]
    fn centre_fold_improves() {
        let mut g = star();
        let refs = ReferenceSigns::from_genotype(&g).unwrap();
        g.coords_mut(Side::Target)[6] = Vec3::new(1.3, 0.2, 0.1);
        let before = total(&g, &refs);
        assert!(before > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = repair(&mut g, &refs, |p| p != 6, None, &RepairConfig::default(), &mut rng);
        assert!(matches!(out, RepairOutcome::Improved { .. }));
        assert!(total(&g, &refs) < before);
    }

    #[test]
    fn zero_samples_abort() {
        let mut g = star();
        let refs = ReferenceSigns::from_genotype(&g).unwrap();
        g.coords_mut(Side::Source)[6] = Vec3::new(1.3, 0.2, 0.1);
        let folded = g.clone();
        let cfg = RepairConfig {
            samples: 0,
            ..RepairConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(repair(&mut g, &refs, |p| p != 6, None, &cfg, &mut rng), RepairOutcome::Aborted);
        assert_eq!(g, folded);
    }
}
