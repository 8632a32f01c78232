//! Per-tet quasi-random barycentric samples seeded by the tet coordinates.

use crate::geometry::Vec3;
use crate::hash::Fnv1a;
use crate::mesh::tet_signed_volume;
use crate::sobol::Sobol;
use crate::{Error, Result};

/// Coordinate quantum for the sample seed, in mm.
pub const SEED_QUANTUM_MM: f64 = 1e-4;

/// `max(1, round(rate · |volume| / voxel_volume))`.
#[inline]
pub fn sample_count(volume: f64, rate: f64, voxel_volume: f64) -> usize {
    ((rate * volume.abs() / voxel_volume).round() as usize).max(1)
}

/// FNV-1a over the tet's vertex coordinates quantized to [`SEED_QUANTUM_MM`].
#[inline]
pub fn tet_seed(p: &[Vec3; 4]) -> u64 {
    let mut h = Fnv1a::new();
    for v in p {
        for a in 0..3 {
            h.write_i64((v[a] / SEED_QUANTUM_MM).round() as i64);
        }
    }
    h.finish()
}

/// Uniform barycentric weights from four Sobol reals via `-ln r`, normalized.
#[derive(Debug, Clone)]
pub struct TetSampler {
    seq: Sobol<4>,
    left: usize,
}

impl TetSampler {
    pub fn new(p: &[Vec3; 4], rate: f64, voxel_volume: f64) -> Self {
        Self {
            seq: Sobol::new(tet_seed(p)),
            left: sample_count(tet_signed_volume(p), rate, voxel_volume),
        }
    }
}

impl Iterator for TetSampler {
    type Item = [f64; 4];

    #[inline]
    fn next(&mut self) -> Option<[f64; 4]> {
        if self.left == 0 {
            return None;
        }
        self.left -= 1;
        let r = self.seq.next_point();
        let e = [-r[0].ln(), -r[1].ln(), -r[2].ln(), -r[3].ln()];
        let s = e[0] + e[1] + e[2] + e[3];
        Some([e[0] / s, e[1] / s, e[2] / s, e[3] / s])
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.left, Some(self.left))
    }
}

/// All sample weights of a non-degenerate tet.
pub fn sample_tet_points(p: &[Vec3; 4], rate: f64, voxel_volume: f64) -> Result<Vec<[f64; 4]>> {
    let v = tet_signed_volume(p);
    if v == 0.0 {
        return Err(Error::DegenerateTet(v));
    }
    Ok(TetSampler::new(p, rate, voxel_volume).collect())
}
