//! Per-tet elasticity factors from object-mask overlap fractions.

use super::sampling::TetSampler;
use crate::mesh::DualMeshGenotype;
use crate::mesh::Side;
use crate::volume::LabelMask;

pub const DEFAULT_FACTOR: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ElasticityMap {
    pub factors: Vec<f64>,
    pub label_factors: Vec<(String, f64)>,
}

impl ElasticityMap {
    pub fn homogeneous(num_tets: usize) -> Self {
        Self {
            factors: vec![DEFAULT_FACTOR; num_tets],
            label_factors: Vec::new(),
        }
    }

    #[inline]
    pub fn factor(&self, t: usize) -> f64 {
        self.factors[t]
    }
}

/// `c = Σ fraction_k · factor_k + (1 - Σ fraction_k) · 1`, where the
/// fractions are the shares of a tet's source-side samples falling in each
/// configured mask. A sample inside several masks counts for the first one
/// listed in `label_factors`, so fractions never sum above one.
pub fn compute_elasticity_factors(
    g: &DualMeshGenotype,
    masks: &[LabelMask],
    label_factors: &[(String, f64)],
    rate: f64,
    voxel_volume: f64,
) -> ElasticityMap {
    let active: Vec<(&LabelMask, f64)> = label_factors
        .iter()
        .filter_map(|(l, f)| masks.iter().find(|m| &m.label == l).map(|m| (m, *f)))
        .collect();
    let factors = (0..g.topology.num_tets())
        .map(|t| {
            if active.is_empty() {
                return DEFAULT_FACTOR;
            }
            let p = g.tet_points(Side::Source, t);
            let mut hits = vec![0usize; active.len()];
            let mut n = 0usize;
            for w in TetSampler::new(&p, rate, voxel_volume) {
                n += 1;
                let q = p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + p[3] * w[3];
                if let Some(k) = active.iter().position(|(m, _)| m.contains_point(&q)) {
                    hits[k] += 1;
                }
            }
            let mut c = 0.0;
            let mut covered = 0.0;
            for (h, (_, f)) in hits.iter().zip(&active) {
                let frac = *h as f64 / n as f64;
                c += frac * f;
                covered += frac;
            }
            c + (1.0 - covered) * DEFAULT_FACTOR
        })
        .collect();
    ElasticityMap {
        factors,
        label_factors: label_factors.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::Vec3;
    use crate::mesh::TetTopology;
    use crate::volume::Geometry;

    fn one_tet() -> DualMeshGenotype {
        let topo = Arc::new(TetTopology::new(4, vec![[0, 1, 2, 3]]).unwrap());
        let p = vec![
            Vec3::new(2.0, 2.0, 2.0),
            Vec3::new(14.0, 2.0, 2.0),
            Vec3::new(2.0, 14.0, 2.0),
            Vec3::new(2.0, 2.0, 14.0),
        ];
        DualMeshGenotype::identity(topo, p).unwrap()
    }

    #[test]
    fn inside_outside_and_mixture() {
        let g = one_tet();
        let geo = Geometry::new([20; 3], [1.0; 3], [0.0; 3]).unwrap();
        let all = LabelMask::from_fn(geo, "bone", |_| true);
        let e = compute_elasticity_factors(&g, &[all], &[("bone".into(), 10.0)], 1.0, 1.0);
        assert_eq!(e.factors, vec![10.0]);
        let none = compute_elasticity_factors(&g, &[], &[("bone".into(), 10.0)], 1.0, 1.0);
        assert_eq!(none.factors, vec![1.0]);
        let half = LabelMask::from_fn(geo, "bone", |p| p.x < 5.5);
        let e = compute_elasticity_factors(&g, &[half.clone()], &[("bone".into(), 10.0)], 1.0, 1.0);
        // recompute the fraction directly and apply the mixing rule
        let p = g.tet_points(Side::Source, 0);
        let w: Vec<_> = TetSampler::new(&p, 1.0, 1.0).collect();
        let inside = w
            .iter()
            .filter(|w| half.contains_point(&(p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + p[3] * w[3])))
            .count() as f64
            / w.len() as f64;
        assert!(inside > 0.2 && inside < 0.9);
        assert!((e.factors[0] - (inside * 10.0 + (1.0 - inside))).abs() < 1e-12);
    }
}
