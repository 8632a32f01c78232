//! Optimal mixing: per-element resampling with partial evaluation, repair
//! and immediate accept-or-revert.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::archive::ElitistArchive;
use super::distribution::{split_variables, Gaussian};
use super::repair::{repair_points, PointView, RepairMethod, RepairOutcome};
use super::{EvolverConfig, Problem, Solution};
use crate::geometry::Vec3;
use crate::hash::stream_seed;
use crate::linkage::FosElement;
use crate::mesh::{is_violation, tet_signed_volume, DualMeshGenotype, ReferenceSigns, Side, TetTopology};
use crate::objectives::{ObjectiveVector, TetTerms};

/// A genotype with the two endpoints of one element overridden.
pub struct Patch<'a> {
    base: &'a DualMeshGenotype,
    points: [usize; 2],
    /// `[side][endpoint]`.
    coords: [[Vec3; 2]; 2],
}

impl<'a> Patch<'a> {
    pub fn new(base: &'a DualMeshGenotype, points: [usize; 2]) -> Self {
        let coords = [Side::Source, Side::Target].map(|s| points.map(|p| base.coords(s)[p]));
        Self { base, points, coords }
    }

    pub fn coords(&self) -> [[Vec3; 2]; 2] {
        self.coords
    }

    fn slot(side: Side) -> usize {
        match side {
            Side::Source => 0,
            Side::Target => 1,
        }
    }
}

impl PointView for Patch<'_> {
    fn topology(&self) -> &TetTopology {
        &self.base.topology
    }

    fn point(&self, side: Side, p: usize) -> Vec3 {
        match self.points.iter().position(|&q| q == p) {
            Some(j) => self.coords[Self::slot(side)][j],
            None => self.base.coords(side)[p],
        }
    }

    fn set_point(&mut self, side: Side, p: usize, v: Vec3) {
        if let Some(j) = self.points.iter().position(|&q| q == p) {
            self.coords[Self::slot(side)][j] = v;
        }
    }
}

fn any_violation(view: &impl PointView, refs: &ReferenceSigns, tets: &[u32]) -> bool {
    Side::BOTH.into_iter().any(|side| {
        tets.iter()
            .any(|&t| is_violation(tet_signed_volume(&view.tet_points(side, t as usize)), refs.sign(t as usize)))
    })
}

/// A fold-free resampled state of one element and the new terms of its
/// dependent tets.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub element: usize,
    pub coords: [[Vec3; 2]; 2],
    pub terms: Vec<TetTerms>,
    pub repaired: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MixingStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Offspring that stayed folded after repair (or without repair).
    pub reverted_folded: u64,
    pub repaired: u64,
    pub rejected: u64,
    /// Tets touched by two elements of one color class.
    pub overlap_violations: u64,
}

impl MixingStats {
    pub fn merge(&mut self, o: &MixingStats) {
        self.proposals += o.proposals;
        self.accepted += o.accepted;
        self.reverted_folded += o.reverted_folded;
        self.repaired += o.repaired;
        self.rejected += o.rejected;
        self.overlap_violations += o.overlap_violations;
    }
}

/// Samples, clamps, repairs and evaluates one element; `None` when the
/// offspring stays folded.
pub fn propose(
    problem: &Problem,
    cfg: &EvolverConfig,
    g: &DualMeshGenotype,
    id: usize,
    element: &FosElement,
    dist: &Gaussian,
    rng: &mut ChaCha8Rng,
) -> Option<Proposal> {
    let mesh = &problem.mesh;
    let points = element.points();
    let mut patch = Patch::new(g, points);
    let sampled = split_variables(&dist.sample(rng));
    for (s, side) in Side::BOTH.into_iter().enumerate() {
        for (j, &p) in points.iter().enumerate() {
            if mesh.is_corner(p) {
                continue;
            }
            let mut x = sampled[s][j];
            for a in 0..3 {
                x[a] = x[a].clamp(mesh.bounds.min[a], mesh.bounds.max[a]);
            }
            patch.set_point(side, p, x);
        }
    }
    let tets = &element.dependent_tets;
    let mut repaired = false;
    if any_violation(&patch, &mesh.reference_signs, tets) {
        if cfg.repair_method == RepairMethod::None {
            return None;
        }
        let movable: Vec<usize> = points.into_iter().filter(|&p| !mesh.is_corner(p)).collect();
        let out = repair_points(&mut patch, &mesh.reference_signs, &movable, Some(&mesh.bounds), &cfg.repair, rng);
        if any_violation(&patch, &mesh.reference_signs, tets) {
            return None;
        }
        repaired = matches!(out, RepairOutcome::Improved { .. });
    }
    let terms = tets
        .iter()
        .map(|&t| {
            let t = t as usize;
            problem
                .context
                .tet_terms_from(&patch.tet_points(Side::Source, t), &patch.tet_points(Side::Target, t), t)
        })
        .collect();
    Some(Proposal {
        element: id,
        coords: patch.coords(),
        terms,
        repaired,
    })
}

/// Acceptance rule: dominate the parent or be non-dominated by the archive,
/// within the guidance bound. A parent outside the bound only accepts moves
/// that reduce its guidance.
pub fn accepts(child: &ObjectiveVector, parent: &ObjectiveVector, archive: &ElitistArchive, bound: Option<f64>) -> bool {
    match bound {
        Some(b) if parent.guidance > b => child.guidance < parent.guidance || child.dominates(parent),
        Some(b) if child.guidance > b => false,
        _ => child.dominates(parent) || !archive.dominated(child),
    }
}

/// One pass over the cover FOS for one solution. `dists[e]` is the model of
/// element `e` in the solution's cluster.
#[allow(clippy::too_many_arguments)]
pub fn optimal_mixing(
    problem: &Problem,
    cfg: &EvolverConfig,
    sol: &mut Solution,
    solution_id: usize,
    generation: usize,
    dists: &[Gaussian],
    archive: &mut ElitistArchive,
    bound: Option<f64>,
    touch: &mut Vec<u64>,
    stamp: &mut u64,
) -> MixingStats {
    let plan = &problem.plan;
    let mut stats = MixingStats::default();
    touch.resize(problem.mesh.genotype.topology.num_tets(), 0);
    for class in &plan.classes {
        *stamp += 1;
        let g = &sol.genotype;
        let proposals: Vec<Option<Proposal>> = class
            .par_iter()
            .map(|&e| {
                let mut rng = ChaCha8Rng::from_seed(stream_seed(&[
                    cfg.seed,
                    generation as u64,
                    e as u64,
                    solution_id as u64,
                ]));
                propose(problem, cfg, g, e, &plan.elements[e], &dists[e], &mut rng)
            })
            .collect();
        for (&e, prop) in class.iter().zip(proposals) {
            stats.proposals += 1;
            let element = &plan.elements[e];
            for &t in &element.dependent_tets {
                if touch[t as usize] == *stamp {
                    stats.overlap_violations += 1;
                }
                touch[t as usize] = *stamp;
            }
            let Some(prop) = prop else {
                stats.reverted_folded += 1;
                continue;
            };
            stats.repaired += u64::from(prop.repaired);
            let child = sol.accumulators.preview(&element.dependent_tets, &prop.terms);
            if !accepts(&child, &sol.objectives, archive, bound) {
                stats.rejected += 1;
                continue;
            }
            stats.accepted += 1;
            sol.accumulators.replace(&element.dependent_tets, &prop.terms);
            for (s, side) in Side::BOTH.into_iter().enumerate() {
                for (j, &p) in element.points().iter().enumerate() {
                    sol.genotype.coords_mut(side)[p] = prop.coords[s][j];
                }
            }
            sol.objectives = child;
            let genotype = &sol.genotype;
            archive.insert_with(child, bound, || genotype.clone());
        }
    }
    stats
}
