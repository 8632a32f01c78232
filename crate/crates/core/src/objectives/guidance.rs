//! Truncated distance maps of the guidance point sets on both images.

use super::DEFAULT_GUIDANCE_RADIUS_FRACTION;
use crate::mesh::Side;
use crate::volume::{distance_map_from_points, DistanceMap, Geometry, GuidanceSet};
use crate::{Error, Result};

/// Distance maps of one object's source and target point sets.
#[derive(Debug, Clone)]
pub struct GuidancePairField {
    pub label: String,
    pub source_map: DistanceMap,
    pub target_map: DistanceMap,
    /// `|C_s| / |G_s|`.
    pub source_weight: f64,
    /// `|C_t| / |G_t|`.
    pub target_weight: f64,
}

#[derive(Debug, Clone)]
pub struct GuidanceField {
    pub pairs: Vec<GuidancePairField>,
    /// Truncation radius in mm.
    pub radius: f64,
    /// Per grid cell (indexed by its lower corner), bit k is set when any
    /// corner of the cell lies within the radius of pair k's source set.
    source_bits: Vec<u64>,
    target_bits: Vec<u64>,
}

impl GuidanceField {
    /// Builds the maps on `geometry` with `r` = fraction · x-extent.
    pub fn new(guidance: &GuidanceSet, geometry: &Geometry) -> Result<Self> {
        let r = DEFAULT_GUIDANCE_RADIUS_FRACTION * geometry.extent_mm()[0];
        Self::with_radius(guidance, geometry, r)
    }

    pub fn with_radius(guidance: &GuidanceSet, geometry: &Geometry, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParameter(format!("guidance radius {radius}")));
        }
        if guidance.pairs.len() > 64 {
            return Err(Error::InvalidParameter("at most 64 guidance pairs are supported".into()));
        }
        let gs = guidance.total_source() as f64;
        let gt = guidance.total_target() as f64;
        let pairs = guidance
            .pairs
            .iter()
            .map(|p| {
                Ok(GuidancePairField {
                    label: p.label.clone(),
                    source_map: distance_map_from_points(&p.source_points, geometry)?,
                    target_map: distance_map_from_points(&p.target_points, geometry)?,
                    source_weight: p.source_points.len() as f64 / gs,
                    target_weight: p.target_points.len() as f64 / gt,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let source_bits = cell_bits(geometry, pairs.iter().map(|p| &p.source_map), radius);
        let target_bits = cell_bits(geometry, pairs.iter().map(|p| &p.target_map), radius);
        Ok(Self {
            pairs,
            radius,
            source_bits,
            target_bits,
        })
    }

    /// Pairs that may be within the radius anywhere in the cell at `base`.
    #[inline]
    pub fn candidates(&self, side: Side, base: usize) -> u64 {
        match side {
            Side::Source => self.source_bits[base],
            Side::Target => self.target_bits[base],
        }
    }

    #[inline]
    pub fn map(&self, k: usize, side: Side) -> &DistanceMap {
        match side {
            Side::Source => &self.pairs[k].source_map,
            Side::Target => &self.pairs[k].target_map,
        }
    }

    #[inline]
    pub fn weight(&self, k: usize, side: Side) -> f64 {
        match side {
            Side::Source => self.pairs[k].source_weight,
            Side::Target => self.pairs[k].target_weight,
        }
    }
}

/// Interpolation never undershoots the smallest corner by more than a few
/// ulps, so widening the radius slightly keeps the filter conservative.
fn cell_bits<'a>(geometry: &Geometry, maps: impl Iterator<Item = &'a DistanceMap>, radius: f64) -> Vec<u64> {
    let [nx, ny, nz] = geometry.dims;
    let strides = [1, nx, nx * ny];
    let off = |n: usize, s: usize| if n < 2 { 0 } else { s };
    let (ox, oy, oz) = (off(nx, strides[0]), off(ny, strides[1]), off(nz, strides[2]));
    let limit = radius * (1.0 + 1e-9);
    let mut bits = vec![0u64; geometry.len()];
    for (k, m) in maps.enumerate() {
        let near: Vec<bool> = m.data.iter().map(|&d| d < limit).collect();
        for z in 0..nz.saturating_sub(1).max(1) {
            for y in 0..ny.saturating_sub(1).max(1) {
                for x in 0..nx.saturating_sub(1).max(1) {
                    let b = geometry.index(x, y, z);
                    let any = [0, ox, oy, ox + oy, oz, oz + ox, oz + oy, oz + oy + ox]
                        .iter()
                        .any(|&o| near[b + o]);
                    if any {
                        bits[b] |= 1 << k;
                    }
                }
            }
        }
    }
    bits
}
