//! The three minimized objectives: deformation magnitude, intensity
//! mismatch and guidance mismatch, with full and per-tet partial evaluation.
//!
//! Every tet contributes independent terms. They are kept per tet and
//! summed in 2^-64 fixed point, so replacing the terms of a few tets updates
//! the totals exactly and the totals never depend on summation order.

mod elasticity;
mod guidance;
mod sampling;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use elasticity::{compute_elasticity_factors, ElasticityMap, DEFAULT_FACTOR};
pub use guidance::{GuidanceField, GuidancePairField};
pub use sampling::{sample_count, sample_tet_points, tet_seed, TetSampler, SEED_QUANTUM_MM};

use crate::geometry::Vec3;
use crate::mesh::{detect_folds, DualMeshGenotype, ReferenceSigns, Side, TET_EDGES};
use crate::volume::{interpolate, Geometry, GuidanceSet, LabelMask, Volume};
use crate::{Error, Result};

/// Truncation radius as a share of the image width.
pub const DEFAULT_GUIDANCE_RADIUS_FRACTION: f64 = 0.025;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub magnitude: f64,
    pub intensity: f64,
    pub guidance: f64,
}

impl ObjectiveVector {
    pub fn new(magnitude: f64, intensity: f64, guidance: f64) -> Self {
        Self {
            magnitude,
            intensity,
            guidance,
        }
    }

    #[inline]
    pub fn as_array(&self) -> [f64; 3] {
        [self.magnitude, self.intensity, self.guidance]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// No worse in every objective and better in at least one.
    #[inline]
    pub fn dominates(&self, other: &Self) -> bool {
        let (a, b) = (self.as_array(), other.as_array());
        a.iter().zip(&b).all(|(x, y)| x <= y) && a.iter().zip(&b).any(|(x, y)| x < y)
    }

    /// No worse in every objective.
    #[inline]
    pub fn weakly_dominates(&self, other: &Self) -> bool {
        self.as_array().iter().zip(&other.as_array()).all(|(x, y)| x <= y)
    }

    /// Largest relative difference over the three objectives.
    pub fn max_relative_diff(&self, other: &Self) -> f64 {
        self.as_array()
            .iter()
            .zip(&other.as_array())
            .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-300))
            .fold(0.0, f64::max)
    }
}

/// Squared difference between foreground values, 0 for two background
/// values and 1 for a foreground/background mismatch.
#[inline]
pub fn h(a: f64, b: f64) -> f64 {
    if a > 0.0 && b > 0.0 {
        (a - b) * (a - b)
    } else if a == 0.0 && b == 0.0 {
        0.0
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MagnitudeMetric {
    /// Per-tet elasticity factors from object masks.
    Biomechanical,
    /// Every factor is 1.
    Homogeneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveConfig {
    pub sampling_rate: f64,
    pub magnitude_metric: MagnitudeMetric,
    pub elasticity: Vec<(String, f64)>,
    /// Overrides the default radius (share of the image width) when set.
    pub guidance_radius_mm: Option<f64>,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            sampling_rate: 1.0,
            magnitude_metric: MagnitudeMetric::Biomechanical,
            elasticity: vec![("bone".into(), 10.0), ("bladder".into(), 0.5)],
            guidance_radius_mm: None,
        }
    }
}

/// Contributions of one tet; intensity and guidance are unnormalized sums
/// over its samples on both sides.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TetTerms {
    pub magnitude: f64,
    pub intensity: f64,
    pub guidance: f64,
    pub samples: u32,
}

const FIX_SCALE: f64 = 18_446_744_073_709_551_616.0; // 2^64

#[inline]
fn fix(v: f64) -> i128 {
    (v * FIX_SCALE).round() as i128
}

#[inline]
fn unfix(x: i128) -> f64 {
    x as f64 / FIX_SCALE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Totals {
    pub magnitude: i128,
    pub intensity: i128,
    pub guidance: i128,
    pub samples: u64,
}

impl Totals {
    #[inline]
    fn add(&mut self, t: &TetTerms) {
        self.magnitude += fix(t.magnitude);
        self.intensity += fix(t.intensity);
        self.guidance += fix(t.guidance);
        self.samples += u64::from(t.samples);
    }

    #[inline]
    fn sub(&mut self, t: &TetTerms) {
        self.magnitude -= fix(t.magnitude);
        self.intensity -= fix(t.intensity);
        self.guidance -= fix(t.guidance);
        self.samples -= u64::from(t.samples);
    }

    pub fn objectives(&self, num_tets: usize) -> ObjectiveVector {
        let n = self.samples.max(1) as f64;
        ObjectiveVector {
            magnitude: unfix(self.magnitude) / (10.0 * num_tets.max(1) as f64),
            intensity: unfix(self.intensity) / n,
            guidance: unfix(self.guidance) / n,
        }
    }
}

/// Per-tet terms of one genotype plus their exact totals.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulators {
    per_tet: Vec<TetTerms>,
    totals: Totals,
}

impl Accumulators {
    pub fn from_terms(per_tet: Vec<TetTerms>) -> Self {
        let mut totals = Totals::default();
        for t in &per_tet {
            totals.add(t);
        }
        Self { per_tet, totals }
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn terms(&self, t: usize) -> &TetTerms {
        &self.per_tet[t]
    }

    pub fn objectives(&self) -> ObjectiveVector {
        self.totals.objectives(self.per_tet.len())
    }

    /// Objectives as if the given tets had the given terms.
    pub fn preview(&self, tets: &[u32], terms: &[TetTerms]) -> ObjectiveVector {
        let mut t = self.totals;
        for (&i, new) in tets.iter().zip(terms) {
            t.sub(&self.per_tet[i as usize]);
            t.add(new);
        }
        t.objectives(self.per_tet.len())
    }

    pub fn replace(&mut self, tets: &[u32], terms: &[TetTerms]) {
        for (&i, new) in tets.iter().zip(terms) {
            let old = std::mem::replace(&mut self.per_tet[i as usize], *new);
            self.totals.sub(&old);
            self.totals.add(new);
        }
    }
}

/// Sum of one objective's terms over a tet subset and the normalizing count
/// (tets for magnitude, samples otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialSum {
    pub sum: f64,
    pub count: u64,
}

/// Everything needed to evaluate genotypes of one problem.
#[derive(Debug, Clone)]
pub struct ObjectiveContext {
    pub geometry: Geometry,
    /// Intensities scaled into [0, 1].
    pub source: Volume,
    pub target: Volume,
    pub guidance: Option<GuidanceField>,
    pub elasticity: ElasticityMap,
    pub sampling_rate: f64,
    pub voxel_volume: f64,
}

impl ObjectiveContext {
    /// Elasticity factors come from the source-side masks overlapping the
    /// tets of `initial`.
    pub fn new(
        source: &Volume,
        target: &Volume,
        guidance: Option<&GuidanceSet>,
        masks: &[LabelMask],
        initial: &DualMeshGenotype,
        cfg: &ObjectiveConfig,
    ) -> Result<Self> {
        source.geometry.ensure_same(&target.geometry)?;
        if !(cfg.sampling_rate > 0.0) {
            return Err(Error::InvalidParameter(format!("sampling rate {}", cfg.sampling_rate)));
        }
        let geometry = source.geometry;
        let voxel_volume = geometry.voxel_volume_mm3();
        let guidance = match guidance {
            Some(gs) if !gs.is_empty() => Some(match cfg.guidance_radius_mm {
                Some(r) => GuidanceField::with_radius(gs, &geometry, r)?,
                None => GuidanceField::new(gs, &geometry)?,
            }),
            _ => None,
        };
        let elasticity = match cfg.magnitude_metric {
            MagnitudeMetric::Homogeneous => ElasticityMap::homogeneous(initial.topology.num_tets()),
            MagnitudeMetric::Biomechanical => {
                compute_elasticity_factors(initial, masks, &cfg.elasticity, cfg.sampling_rate, voxel_volume)
            }
        };
        Ok(Self {
            geometry,
            source: source.normalized_unit(),
            target: target.normalized_unit(),
            guidance,
            elasticity,
            sampling_rate: cfg.sampling_rate,
            voxel_volume,
        })
    }

    #[inline]
    fn image(&self, side: Side) -> &Volume {
        match side {
            Side::Source => &self.source,
            Side::Target => &self.target,
        }
    }

    /// Magnitude term of tet `t`.
    #[inline]
    pub fn magnitude_term(&self, s: &[Vec3; 4], d: &[Vec3; 4], t: usize) -> f64 {
        let mut m = 0.0;
        for e in TET_EDGES {
            let x = e.length(s) - e.length(d);
            m += x * x;
        }
        self.elasticity.factor(t) * m
    }

    /// Intensity and guidance sums over the samples of the `side` tet `from`,
    /// mapped to the other side through `to`.
    #[inline]
    fn side_terms(&self, from: &[Vec3; 4], to: &[Vec3; 4], side: Side) -> (f64, f64, u32) {
        let img_from = &self.image(side).data;
        let img_to = &self.image(side.other()).data;
        let mut intensity = 0.0;
        let mut guidance = 0.0;
        let mut n = 0u32;
        for w in TetSampler::new(from, self.sampling_rate, self.voxel_volume) {
            n += 1;
            let p = from[0] * w[0] + from[1] * w[1] + from[2] * w[2] + from[3] * w[3];
            let q = to[0] * w[0] + to[1] * w[1] + to[2] * w[2] + to[3] * w[3];
            let cp = self.geometry.cell(&p);
            let cq = self.geometry.cell(&q);
            intensity += h(interpolate(img_from, &cp), interpolate(img_to, &cq));
            if let Some(gf) = &self.guidance {
                let mut bits = gf.candidates(side, cp.base);
                while bits != 0 {
                    let k = bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    let d = interpolate(&gf.map(k, side).data, &cp);
                    if d < gf.radius {
                        let d2 = interpolate(&gf.map(k, side.other()).data, &cq);
                        guidance += gf.weight(k, side) * ((gf.radius - d) / gf.radius) * (d - d2) * (d - d2);
                    }
                }
            }
        }
        (intensity, guidance, n)
    }

    /// All terms of tet `t`.
    pub fn tet_terms(&self, g: &DualMeshGenotype, t: usize) -> TetTerms {
        self.tet_terms_from(&g.tet_points(Side::Source, t), &g.tet_points(Side::Target, t), t)
    }

    /// Terms of tet `t` given its corner positions on both sides.
    pub fn tet_terms_from(&self, s: &[Vec3; 4], d: &[Vec3; 4], t: usize) -> TetTerms {
        let (s, d) = (*s, *d);
        let (i1, g1, n1) = self.side_terms(&s, &d, Side::Source);
        let (i2, g2, n2) = self.side_terms(&d, &s, Side::Target);
        TetTerms {
            magnitude: self.magnitude_term(&s, &d, t),
            intensity: i1 + i2,
            guidance: g1 + g2,
            samples: n1 + n2,
        }
    }

    pub fn terms_for(&self, g: &DualMeshGenotype, tets: &[u32]) -> Vec<TetTerms> {
        tets.iter().map(|&t| self.tet_terms(g, t as usize)).collect()
    }

    /// Terms of every tet, computed in parallel and merged in tet order.
    pub fn evaluate(&self, g: &DualMeshGenotype) -> Accumulators {
        let terms = (0..g.topology.num_tets())
            .into_par_iter()
            .map(|t| self.tet_terms(g, t))
            .collect();
        Accumulators::from_terms(terms)
    }

    /// Normalized objectives of a fold-free genotype.
    pub fn full_evaluate(&self, g: &DualMeshGenotype, refs: &ReferenceSigns) -> Result<ObjectiveVector> {
        let folds = detect_folds(g, Side::Source, refs).len() + detect_folds(g, Side::Target, refs).len();
        if folds > 0 {
            return Err(Error::Folded(folds));
        }
        Ok(self.evaluate(g).objectives())
    }

    /// Recomputes the terms of `tets` after a move and returns the updated
    /// objectives.
    pub fn partial_update(&self, g: &DualMeshGenotype, acc: &mut Accumulators, tets: &[u32]) -> ObjectiveVector {
        let terms = self.terms_for(g, tets);
        acc.replace(tets, &terms);
        acc.objectives()
    }

    fn subset_sum(&self, g: &DualMeshGenotype, tets: &[u32], pick: impl Fn(&TetTerms) -> f64, by_tet: bool) -> PartialSum {
        let mut sum = 0i128;
        let mut count = 0u64;
        for &t in tets {
            let terms = self.tet_terms(g, t as usize);
            sum += fix(pick(&terms));
            count += if by_tet { 1 } else { u64::from(terms.samples) };
        }
        PartialSum { sum: unfix(sum), count }
    }

    pub fn eval_magnitude(&self, g: &DualMeshGenotype, tets: &[u32]) -> PartialSum {
        let mut sum = 0i128;
        for &t in tets {
            let t = t as usize;
            sum += fix(self.magnitude_term(&g.tet_points(Side::Source, t), &g.tet_points(Side::Target, t), t));
        }
        PartialSum {
            sum: unfix(sum),
            count: tets.len() as u64,
        }
    }

    pub fn eval_intensity(&self, g: &DualMeshGenotype, tets: &[u32]) -> PartialSum {
        self.subset_sum(g, tets, |t| t.intensity, false)
    }

    pub fn eval_guidance(&self, g: &DualMeshGenotype, tets: &[u32]) -> PartialSum {
        self.subset_sum(g, tets, |t| t.guidance, false)
    }
}
