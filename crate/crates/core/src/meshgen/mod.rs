//! Initial mesh construction: contour-driven point placement, marching-cubes
//! surface points and a Delaunay tetrahedralization covering the image box.

mod delaunay;
mod marching;
mod tables;

use std::sync::Arc;

pub use delaunay::{delaunay_tetrahedralize, insphere, Delaunay, JITTER_MM};
pub use marching::{marching_cubes, SurfaceMesh};

use crate::geometry::{Aabb, Vec3};
use crate::mesh::{DualMeshGenotype, ReferenceSigns};
use crate::sobol::Sobol;
use crate::volume::{Geometry, GuidanceSet, LabelMask};
use crate::{Error, Result};

/// Points closer than this count as duplicates.
pub const MIN_SEPARATION_MM: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PointPlacementConfig {
    pub total_points: usize,
    /// Share of `total_points` placed quasi-randomly in the image box.
    pub random_fraction: f64,
    /// Contour-point weights per guidance label. Empty means proportional
    /// to each object's candidate count; unlisted labels get nothing.
    pub allocation: Vec<(String, f64)>,
    /// Mask label whose marching-cubes vertices are added as extra points.
    pub surface_object: Option<String>,
    /// Maximum number of surface points kept after decimation.
    pub surface_budget: usize,
}

impl Default for PointPlacementConfig {
    fn default() -> Self {
        Self {
            total_points: 600,
            random_fraction: 0.1,
            allocation: Vec::new(),
            surface_object: None,
            surface_budget: 150,
        }
    }
}

impl PointPlacementConfig {
    pub fn validate(&self) -> Result<()> {
        if self.total_points < 5 {
            return Err(Error::InvalidParameter(format!(
                "total_points must be at least 5, got {}",
                self.total_points
            )));
        }
        if !(0.0..=1.0).contains(&self.random_fraction) {
            return Err(Error::InvalidParameter(format!(
                "random_fraction {} outside [0, 1]",
                self.random_fraction
            )));
        }
        if self.allocation.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidParameter("allocation weights must be non-negative".into()));
        }
        Ok(())
    }

    /// Applies a `random`, `contours` or `contours+surface:<label>` method.
    pub fn with_method(mut self, method: &str) -> Result<Self> {
        match method {
            "random" => {
                self.random_fraction = 1.0;
                self.surface_object = None;
            }
            "contours" => self.surface_object = None,
            m => match m.strip_prefix("contours+surface:") {
                Some(label) if !label.is_empty() => self.surface_object = Some(label.to_string()),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown mesh generation method {method:?}"
                    )))
                }
            },
        }
        Ok(self)
    }

    pub fn num_random(&self) -> usize {
        (self.random_fraction * self.total_points as f64).round() as usize
    }
}

/// Splits `n` by weights with the largest-remainder rule (ties to the lower index).
pub fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    if weights.is_empty() || !(total > 0.0) {
        return vec![0; weights.len()];
    }
    let exact: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - out.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if weights[i] > 0.0 {
            out[i] += 1;
            left -= 1;
        }
    }
    out
}

/// Greedy farthest-first subset of `candidates`: starts at the candidate
/// farthest from their centroid, then repeatedly takes the candidate with
/// the largest distance to everything chosen so far (including `existing`).
/// Candidates within [`MIN_SEPARATION_MM`] of a chosen point are skipped.
pub fn farthest_first(candidates: &[Vec3], count: usize, existing: &[Vec3]) -> Result<Vec<Vec3>> {
    let chosen = farthest_first_up_to(candidates, count, existing);
    if chosen.len() < count {
        return Err(Error::InsufficientCandidates {
            requested: count,
            available: chosen.len(),
        });
    }
    Ok(chosen)
}

/// As [`farthest_first`], stopping early when candidates run out.
pub fn farthest_first_up_to(candidates: &[Vec3], count: usize, existing: &[Vec3]) -> Vec<Vec3> {
    let mut mind: Vec<f64> = candidates
        .iter()
        .map(|c| existing.iter().map(|e| (c - e).norm()).fold(f64::INFINITY, f64::min))
        .collect();
    let centroid = candidates.iter().fold(Vec3::zeros(), |a, c| a + c) / candidates.len().max(1) as f64;
    let mut chosen = Vec::with_capacity(count);
    while chosen.len() < count {
        let first = chosen.is_empty();
        let mut best: Option<(usize, f64)> = None;
        for (i, c) in candidates.iter().enumerate() {
            if !(mind[i] > MIN_SEPARATION_MM) {
                continue;
            }
            let score = if first { (c - centroid).norm() } else { mind[i] };
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((i, score));
            }
        }
        let Some((i, _)) = best else { break };
        let p = candidates[i];
        chosen.push(p);
        for (m, c) in mind.iter_mut().zip(candidates) {
            *m = m.min((c - p).norm());
        }
    }
    chosen
}

/// Contour points (farthest-first per guidance object, source side) followed
/// by quasi-random points inside `bounds`.
pub fn select_contour_points(
    guidance: &GuidanceSet,
    cfg: &PointPlacementConfig,
    bounds: &Aabb,
    seed: u64,
) -> Result<Vec<Vec3>> {
    cfg.validate()?;
    let n_random = cfg.num_random();
    let n_contour = cfg.total_points - n_random;
    let weights: Vec<f64> = guidance
        .pairs
        .iter()
        .map(|p| {
            if cfg.allocation.is_empty() {
                p.source_points.len() as f64
            } else {
                cfg.allocation
                    .iter()
                    .find(|(l, _)| *l == p.label)
                    .map_or(0.0, |(_, w)| *w)
            }
        })
        .collect();
    if n_contour > 0 && !(weights.iter().sum::<f64>() > 0.0) {
        return Err(Error::InsufficientCandidates {
            requested: n_contour,
            available: 0,
        });
    }
    let quotas = largest_remainder(n_contour, &weights);
    let mut points = Vec::with_capacity(cfg.total_points);
    for (pair, &q) in guidance.pairs.iter().zip(&quotas) {
        let picked = farthest_first(&pair.source_points, q, &points)?;
        points.extend(picked);
    }
    points.extend(random_points(n_random, bounds, seed, &points)?);
    Ok(points)
}

/// Sobol points strictly inside `bounds`, away from `existing`.
fn random_points(count: usize, bounds: &Aabb, seed: u64, existing: &[Vec3]) -> Result<Vec<Vec3>> {
    let mut seq = Sobol::<3>::new(seed);
    let size = bounds.size();
    let mut out: Vec<Vec3> = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 100 * (count + 1) {
            return Err(Error::InsufficientCandidates {
                requested: count,
                available: out.len(),
            });
        }
        let r = seq.next_point();
        let p = bounds.min + Vec3::new(r[0] * size.x, r[1] * size.y, r[2] * size.z);
        let clash = existing
            .iter()
            .chain(out.iter())
            .any(|q| (p - q).norm() <= MIN_SEPARATION_MM);
        if !clash {
            out.push(p);
        }
    }
    Ok(out)
}

/// Initial dual mesh with both coordinate sets equal.
#[derive(Debug, Clone)]
pub struct InitialMesh {
    pub genotype: DualMeshGenotype,
    pub reference_signs: ReferenceSigns,
    /// Ids of the eight box-corner points (the last eight).
    pub corner_points: Vec<usize>,
    /// Image box the corners span.
    pub bounds: Aabb,
    pub num_surface_points: usize,
}

impl InitialMesh {
    pub fn is_corner(&self, p: usize) -> bool {
        p >= self.genotype.num_points() - 8
    }
}

/// Places points, tetrahedralizes them inside the image box and duplicates
/// the result to both sides.
pub fn build_initial_genotype(
    geometry: &Geometry,
    guidance: &GuidanceSet,
    masks: &[LabelMask],
    cfg: &PointPlacementConfig,
    seed: u64,
) -> Result<InitialMesh> {
    let bounds = geometry.physical_bounds();
    let inset = 0.01 * geometry.spacing_mm.iter().copied().fold(f64::INFINITY, f64::min);
    let inner = Aabb::new(bounds.min + Vec3::repeat(inset), bounds.max - Vec3::repeat(inset));

    let mut points = select_contour_points(guidance, cfg, &inner, seed)?;
    let mut num_surface = 0;
    if let Some(label) = &cfg.surface_object {
        let mask = masks
            .iter()
            .find(|m| &m.label == label)
            .ok_or_else(|| Error::InvalidParameter(format!("no mask labelled {label:?}")))?;
        let surf = marching_cubes(mask, 0.5)?;
        let picked = farthest_first_up_to(&surf.vertices, cfg.surface_budget, &points);
        num_surface = picked.len();
        points.extend(picked);
    }

    for p in points.iter_mut() {
        for a in 0..3 {
            p[a] = p[a].clamp(inner.min[a], inner.max[a]);
        }
    }
    for i in 0..points.len() {
        for j in 0..i {
            if (points[i] - points[j]).norm() <= MIN_SEPARATION_MM {
                return Err(Error::Geometry(format!("points {j} and {i} coincide after clamping")));
            }
        }
    }

    let d = delaunay_tetrahedralize(&points, Some(&bounds))?;
    let n = d.points.len();
    let genotype = DualMeshGenotype::identity(Arc::new(d.topology), d.points)?;
    let reference_signs = ReferenceSigns::from_genotype(&genotype)?;
    Ok(InitialMesh {
        genotype,
        reference_signs,
        corner_points: (n - 8..n).collect(),
        bounds,
        num_surface_points: num_surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::GuidancePair;

    #[test]
    fn largest_remainder_splits() {
        assert_eq!(largest_remainder(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(7, &[0.0, 2.0, 5.0]), vec![0, 2, 5]);
        assert_eq!(largest_remainder(5, &[]), Vec::<usize>::new());
    }

    #[test]
    fn line_endpoints_chosen_first() {
        let line: Vec<Vec3> = (0..100).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect();
        let p = farthest_first(&line, 4, &[]).unwrap();
        assert!(p.contains(&line[0]) && p.contains(&line[99]));
        assert!(farthest_first(&line[..3], 4, &[]).is_err());
    }

    #[test]
    fn method_strings() {
        let c = PointPlacementConfig::default();
        assert_eq!(c.clone().with_method("random").unwrap().random_fraction, 1.0);
        assert_eq!(
            c.clone().with_method("contours+surface:bladder").unwrap().surface_object.as_deref(),
            Some("bladder")
        );
        assert!(c.with_method("spiral").is_err());
    }

    #[test]
    fn contour_only_points_lie_on_contours() {
        let pts: Vec<Vec3> = (0..40)
            .map(|i| {
                let t = i as f64 / 40.0 * std::f64::consts::TAU;
                Vec3::new(10.0 + 5.0 * t.cos(), 10.0 + 5.0 * t.sin(), 10.0)
            })
            .collect();
        let gs = GuidanceSet::new(vec![GuidancePair {
            label: "ring".into(),
            source_points: pts.clone(),
            target_points: pts.clone(),
        }])
        .unwrap();
        let cfg = PointPlacementConfig {
            total_points: 12,
            random_fraction: 0.0,
            ..Default::default()
        };
        let bx = Aabb::new(Vec3::zeros(), Vec3::repeat(20.0));
        let sel = select_contour_points(&gs, &cfg, &bx, 1).unwrap();
        assert_eq!(sel.len(), 12);
        assert!(sel.iter().all(|p| pts.contains(p)));
        let cfg = PointPlacementConfig {
            random_fraction: 0.5,
            ..cfg
        };
        let a = select_contour_points(&gs, &cfg, &bx, 9).unwrap();
        assert_eq!(a, select_contour_points(&gs, &cfg, &bx, 9).unwrap());
        assert_eq!(a.len(), 12);
    }
}
