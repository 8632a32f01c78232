#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tetreg::evolver::Problem;
use tetreg::geometry::Aabb;
use tetreg::mesh::DualMeshGenotype;
use tetreg::meshgen::{delaunay_tetrahedralize, PointPlacementConfig};
use tetreg::objectives::ObjectiveConfig;
use tetreg::synth::{generate_case, ProblemBundle, SynthSpec};
use tetreg::Vec3;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(n: usize, seed: u64) -> Vec<Vec3> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| Vec3::new(r.random_range(-10.0..10.0), r.random_range(-10.0..10.0), r.random_range(-10.0..10.0)))
        .collect()
}

pub fn unit_box() -> Aabb {
    Aabb::new(Vec3::repeat(-12.0), Vec3::repeat(12.0))
}

/// Identity genotype on the Delaunay mesh of random points in a box.
pub fn random_genotype(n: usize, seed: u64) -> DualMeshGenotype {
    let d = delaunay_tetrahedralize(&random_points(n, seed), Some(&unit_box())).unwrap();
    let topo = Arc::new(d.topology);
    DualMeshGenotype::identity(topo, d.points).unwrap()
}

/// A coarse synthetic case and its problem with roughly `points` mesh points.
pub fn small_problem(n: usize, points: usize, seed: u64) -> (ProblemBundle, Problem) {
    let spec = SynthSpec::preset(n, 96.0 / n as f64);
    let bundle = generate_case(&spec).unwrap();
    let placement = PointPlacementConfig {
        total_points: points,
        ..Default::default()
    };
    let problem = Problem::build(
        &bundle.source,
        &bundle.target,
        &bundle.guidance,
        &bundle.source_masks,
        &placement,
        &ObjectiveConfig::default(),
        seed,
    )
    .unwrap();
    (bundle, problem)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
