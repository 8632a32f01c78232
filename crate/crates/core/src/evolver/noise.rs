//! Fold-free perturbations of the initial mesh that diversify the
//! starting population.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::repair::surrounding_distance;
use crate::geometry::{Aabb, Vec3};
use crate::hash::stream_seed;
use crate::mesh::{is_violation, DualMeshGenotype, ReferenceSigns, Side};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMethod {
    /// Independent Gaussian offsets per point, scaled by local mesh size.
    GlobalGaussian,
    /// Gravity-like attraction of target points towards random kernels.
    RbfKernels,
}

impl std::str::FromStr for NoiseMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global-gaussian" => Ok(Self::GlobalGaussian),
            "rbf-kernels" => Ok(Self::RbfKernels),
            _ => Err(Error::Config(format!("unknown noise method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub method: NoiseMethod,
    pub factor: f64,
    pub kernel_count: usize,
    pub kernel_weight_range: (f64, f64),
    /// Kernel width as a fraction of the smallest box extent.
    pub kernel_width_fraction: f64,
    pub rounds: usize,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            method: NoiseMethod::GlobalGaussian,
            factor: 1.0,
            kernel_count: 5,
            kernel_weight_range: (0.05, 0.2),
            kernel_width_fraction: 0.25,
            rounds: 10,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.kernel_weight_range;
        if !(self.factor >= 0.0) || !(lo >= 0.0 && lo <= hi) || !(self.kernel_width_fraction > 0.0) {
            return Err(Error::InvalidParameter(format!("noise config {self:?}")));
        }
        Ok(())
    }
}

fn clamp_to(b: &Aabb, mut x: Vec3) -> Vec3 {
    for a in 0..3 {
        x[a] = x[a].clamp(b.min[a], b.max[a]);
    }
    x
}

/// Moves `p` to `x` unless an incident tet on `side` would violate its
/// reference sign.
fn try_move(g: &mut DualMeshGenotype, side: Side, refs: &ReferenceSigns, p: usize, x: Vec3) -> bool {
    let old = g.coords(side)[p];
    g.coords_mut(side)[p] = x;
    let topo = g.topology.clone();
    let bad = topo
        .incident_tets(p)
        .iter()
        .any(|&t| is_violation(g.tet_volume(side, t as usize), refs.sign(t as usize)));
    if bad {
        g.coords_mut(side)[p] = old;
    }
    !bad
}

/// A perturbed copy of `base`; points for which `pinned` holds never move
/// and no move that would fold a tet is kept.
pub fn perturb(
    base: &DualMeshGenotype,
    refs: &ReferenceSigns,
    pinned: impl Fn(usize) -> bool,
    bounds: &Aabb,
    cfg: &NoiseConfig,
    rng: &mut impl Rng,
) -> DualMeshGenotype {
    let mut g = base.clone();
    if cfg.factor == 0.0 {
        return g;
    }
    let n = g.num_points();
    match cfg.method {
        NoiseMethod::GlobalGaussian => {
            for side in Side::BOTH {
                for p in (0..n).filter(|&p| !pinned(p)) {
                    let sigma = cfg.factor * 0.5 * surrounding_distance(&g, side, refs, p);
                    if !(sigma.is_finite() && sigma > 0.0) {
                        continue;
                    }
                    let off = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
                    let x = clamp_to(bounds, g.coords(side)[p] + off * sigma);
                    try_move(&mut g, side, refs, p, x);
                }
            }
        }
        NoiseMethod::RbfKernels => {
            let size = bounds.size();
            let width = cfg.kernel_width_fraction * size.min();
            let (lo, hi) = cfg.kernel_weight_range;
            let kernels: Vec<(Vec3, f64)> = (0..cfg.kernel_count)
                .map(|_| {
                    let c = Vec3::new(
                        bounds.min.x + rng.random::<f64>() * size.x,
                        bounds.min.y + rng.random::<f64>() * size.y,
                        bounds.min.z + rng.random::<f64>() * size.z,
                    );
                    (c, lo + rng.random::<f64>() * (hi - lo))
                })
                .collect();
            let rounds = cfg.rounds.max(1);
            for _ in 0..rounds {
                for p in (0..n).filter(|&p| !pinned(p)) {
                    let x = g.coords(Side::Target)[p];
                    let mut step = Vec3::zeros();
                    for (c, w) in &kernels {
                        let d = c - x;
                        step += d * (w * (-d.norm_squared() / (2.0 * width * width)).exp());
                    }
                    let y = clamp_to(bounds, x + step * (cfg.factor / rounds as f64));
                    try_move(&mut g, Side::Target, refs, p, y);
                }
            }
        }
    }
    g
}

/// `size` genotypes: the unperturbed base followed by independently
/// perturbed copies, each from its own `(seed, index)` stream.
pub fn init_population(
    base: &DualMeshGenotype,
    refs: &ReferenceSigns,
    pinned: impl Fn(usize) -> bool + Sync,
    bounds: &Aabb,
    size: usize,
    cfg: &NoiseConfig,
    seed: u64,
) -> Vec<DualMeshGenotype> {
    use rayon::prelude::*;
    (0..size)
        .into_par_iter()
        .map(|i| {
            if i == 0 {
                return base.clone();
            }
            let mut rng = ChaCha8Rng::from_seed(stream_seed(&[seed, u64::MAX, i as u64]));
            perturb(base, refs, &pinned, bounds, cfg, &mut rng)
        })
        .collect()
}
