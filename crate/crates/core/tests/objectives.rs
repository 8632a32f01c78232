mod common;

use proptest::prelude::*;
use rand::Rng;

use common::{rel_close, rng, small_problem};
use tetreg::mesh::{detect_folds_in, Side};
use tetreg::Vec3;

/// Random single-element moves on a small problem: the incrementally kept
/// objectives must match a full re-evaluation after every accepted move.
fn random_steps(steps: usize, seed: u64) -> usize {
    let (_, p) = small_problem(16, 14, seed);
    let refs = &p.mesh.reference_signs;
    let mut g = p.mesh.genotype.clone();
    let mut acc = p.context.evaluate(&g);
    let mut r = rng(seed);
    let mut applied = 0;
    for _ in 0..steps {
        let e = &p.plan.elements[r.random_range(0..p.plan.elements.len())];
        let old = g.clone();
        for q in e.points() {
            if p.mesh.is_corner(q) {
                continue;
            }
            for side in Side::BOTH {
                let d = Vec3::new(r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
                g.coords_mut(side)[q] += d;
            }
        }
        let tets = e.dependent_tets.iter().map(|&t| t as usize);
        let folded = Side::BOTH
            .into_iter()
            .any(|s| !detect_folds_in(&g, s, refs, tets.clone()).is_empty());
        if folded {
            g = old;
            continue;
        }
        let inc = p.context.partial_update(&g, &mut acc, &e.dependent_tets);
        let full = p.context.evaluate(&g).objectives();
        for (a, b) in inc.as_array().iter().zip(full.as_array()) {
            assert!(rel_close(*a, b, 1e-9), "incremental {a} vs full {b}");
        }
        applied += 1;
    }
    applied
}

#[test]
fn partial_updates_match_full_evaluation() {
    let (_, p) = small_problem(16, 14, 1);
    let n = p.mesh.genotype.topology.num_tets();
    assert!((30..=120).contains(&n), "fixture has {n} tets");
    assert!(random_steps(1000, 1) > 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn partial_updates_are_exact_for_any_seed(seed in 0u64..1000) {
        random_steps(100, seed);
    }

    #[test]
    fn identity_has_zero_magnitude(seed in 0u64..1000) {
        let (_, p) = small_problem(16, 14, seed);
        let o = p.context.evaluate(&p.mesh.genotype).objectives();
        prop_assert_eq!(o.magnitude, 0.0);
        prop_assert!(o.intensity >= 0.0 && o.guidance >= 0.0);
    }
}

#[test]
fn evaluation_is_reproducible_and_order_free() {
    let (_, p) = small_problem(16, 20, 3);
    let a = p.context.evaluate(&p.mesh.genotype);
    let b = p.context.evaluate(&p.mesh.genotype);
    assert_eq!(a.objectives(), b.objectives());
    let mut all: Vec<u32> = (0..p.mesh.genotype.topology.num_tets() as u32).collect();
    all.reverse();
    let mut acc = a.clone();
    let o = p.context.partial_update(&p.mesh.genotype, &mut acc, &all);
    assert_eq!(o, a.objectives());
}
