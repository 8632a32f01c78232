mod common;

use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use common::{random_genotype, rng, small_problem};
use tetreg::evolver::{
    hypervolume3, init_population, point_severity, repair, run, run_with_observer, select_and_cluster, ElitistArchive,
    EvolverConfig, Gaussian, NoiseConfig, NoiseMethod, RepairConfig, RepairOutcome,
};
use tetreg::mesh::{detect_folds, DualMeshGenotype, ReferenceSigns, Side};
use tetreg::objectives::ObjectiveVector;
use tetreg::Vec3;

fn dummy() -> DualMeshGenotype {
    let topo = Arc::new(tetreg::mesh::TetTopology::new(4, vec![[0, 1, 2, 3]]).unwrap());
    DualMeshGenotype::identity(topo, vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]).unwrap()
}

fn objective() -> impl Strategy<Value = ObjectiveVector> {
    (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b, c)| ObjectiveVector::new(a, b, c))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn archive_stays_nondominated_and_bounded(objs in prop::collection::vec(objective(), 1..300), cap in 4usize..40) {
        let g = dummy();
        let mut a = ElitistArchive::new(cap);
        let mut best = [f64::INFINITY; 3];
        for o in &objs {
            a.insert(*o, &g, None);
            for k in 0..3 {
                best[k] = best[k].min(o.as_array()[k]);
            }
            prop_assert!(a.len() <= cap);
        }
        let m = a.objectives();
        for i in 0..m.len() {
            for j in 0..m.len() {
                prop_assert!(i == j || !m[i].weakly_dominates(&m[j]));
            }
        }
        for k in 0..3 {
            let have = m.iter().map(|o| o.as_array()[k]).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(have, best[k]);
        }
    }

    #[test]
    fn hypervolume_is_monotone_under_insertion(objs in prop::collection::vec(objective(), 1..60)) {
        let reference = [1.1; 3];
        let g = dummy();
        let mut a = ElitistArchive::new(1000);
        let mut last = 0.0;
        for o in &objs {
            a.insert(*o, &g, None);
            let pts: Vec<[f64; 3]> = a.objectives().iter().map(|o| o.as_array()).collect();
            let hv = hypervolume3(&pts, reference).unwrap();
            prop_assert!(hv >= last - 1e-12);
            last = hv;
        }
    }

    #[test]
    fn clusters_are_balanced(objs in prop::collection::vec(objective(), 2..120), k in 1usize..12, frac in 0.1f64..1.0) {
        let c = select_and_cluster(&objs, k, frac);
        let sizes: Vec<usize> = c.clusters.iter().map(Vec::len).collect();
        let lo = *sizes.iter().min().unwrap();
        let hi = *sizes.iter().max().unwrap();
        prop_assert!(hi - lo <= 1);
        prop_assert_eq!(c.assignment.len(), objs.len());
        prop_assert!(c.assignment.iter().all(|&a| a < c.clusters.len()));
    }

    #[test]
    fn repair_never_increases_severity(seed in 0u64..500, push in 0.5f64..4.0) {
        let mut g = random_genotype(25, seed);
        let refs = ReferenceSigns::from_genotype(&g).unwrap();
        let mut r = rng(seed);
        let n = g.num_points() - 8;
        let p = r.random_range(0..n);
        let target = g.topology.incident_tets(p)[0] as usize;
        let opp: Vec<usize> = g.topology.tet(target).iter().map(|&q| q as usize).filter(|&q| q != p).collect();
        let centroid = (g.target[opp[0]] + g.target[opp[1]] + g.target[opp[2]]) / 3.0;
        g.target[p] = centroid + (centroid - g.target[p]) * push;
        let sev = |g: &DualMeshGenotype| (0..g.num_points()).map(|q| point_severity(g, Side::Target, &refs, q)).sum::<f64>();
        let before = sev(&g);
        let outcome = repair(&mut g, &refs, |q| q >= n, None, &RepairConfig::default(), &mut r);
        prop_assert!(sev(&g) <= before);
        if before == 0.0 {
            prop_assert_eq!(outcome, RepairOutcome::NoOp);
        }
    }
}

#[test]
fn hypervolume_matches_monte_carlo() {
    let mut r = rng(5);
    for _ in 0..20 {
        let pts: Vec<[f64; 3]> = (0..20).map(|_| [r.random(), r.random(), r.random()]).collect();
        let reference = [1.0001; 3];
        let exact = hypervolume3(&pts, reference).unwrap();
        let n = 200_000;
        let hits = (0..n)
            .filter(|_| {
                let s: [f64; 3] = [r.random::<f64>() * 1.0001, r.random::<f64>() * 1.0001, r.random::<f64>() * 1.0001];
                pts.iter().any(|p| (0..3).all(|k| p[k] <= s[k]))
            })
            .count();
        let mc = hits as f64 / n as f64 * 1.0001f64.powi(3);
        assert!((mc - exact).abs() <= 0.02 * exact, "exact {exact} mc {mc}");
    }
}

#[test]
fn gaussian_of_identical_members_returns_the_mean() {
    let v = tetreg::evolver::ElementVector::from_fn(|i, _| i as f64);
    let g = Gaussian::estimate(&[v, v, v]);
    let mut r = rng(1);
    assert!((g.sample(&mut r) - v).norm() < 1e-5);
}

#[test]
fn initial_population_is_fold_free_and_reproducible() {
    let (_, p) = small_problem(16, 40, 2);
    let m = &p.mesh;
    for method in [NoiseMethod::GlobalGaussian, NoiseMethod::RbfKernels] {
        let cfg = NoiseConfig {
            method,
            ..Default::default()
        };
        let pop = init_population(&m.genotype, &m.reference_signs, |q| m.is_corner(q), &m.bounds, 12, &cfg, 4);
        assert_eq!(pop[0], m.genotype);
        assert!(pop[1..].iter().any(|g| *g != m.genotype));
        for g in &pop {
            for side in Side::BOTH {
                assert!(detect_folds(g, side, &m.reference_signs).is_empty());
            }
        }
        let again = init_population(&m.genotype, &m.reference_signs, |q| m.is_corner(q), &m.bounds, 12, &cfg, 4);
        assert_eq!(pop, again);
    }
    let zero = NoiseConfig {
        factor: 0.0,
        ..Default::default()
    };
    let pop = init_population(&m.genotype, &m.reference_signs, |q| m.is_corner(q), &m.bounds, 5, &zero, 4);
    assert!(pop.iter().all(|g| *g == m.genotype));
}

fn small_config(seed: u64) -> EvolverConfig {
    EvolverConfig {
        population_size: 10,
        num_clusters: 2,
        archive_capacity: 60,
        num_generations: 6,
        steering_activation_generation: 3,
        seed,
        ..Default::default()
    }
}

#[test]
fn run_keeps_its_invariants() {
    let (_, p) = small_problem(16, 40, 1);
    let cfg = small_config(3);
    let mut gens = 0;
    let result = run_with_observer(&p, &cfg, |v| {
        gens += 1;
        let objs = v.archive.objectives();
        assert!(objs.len() <= cfg.archive_capacity);
        for (i, a) in objs.iter().enumerate() {
            for (j, b) in objs.iter().enumerate() {
                assert!(i == j || !a.weakly_dominates(b));
            }
        }
        for m in v.archive.members() {
            for side in Side::BOTH {
                assert!(detect_folds(&m.genotype, side, &p.mesh.reference_signs).is_empty());
            }
            let full = p.context.evaluate(&m.genotype).objectives();
            assert!(full.max_relative_diff(&m.objectives) <= 1e-9);
        }
        if let Some(bound) = v.steering.bound {
            assert!(objs.iter().all(|o| o.guidance <= bound));
            assert!(bound <= cfg.steering_ratio * v.steering.best_guidance * (1.0 + 1e-12));
        }
        for s in v.population {
            let full = p.context.evaluate(&s.genotype).objectives();
            assert!(full.max_relative_diff(&s.objectives) <= 1e-9);
        }
        assert_eq!(v.mixing.overlap_violations, 0);
    })
    .unwrap();
    assert_eq!(gens, cfg.num_generations + 1);
    assert_eq!(result.stats.len(), cfg.num_generations + 1);
    assert!(result.steering.active);

    let again = run(&p, &cfg).unwrap();
    assert_eq!(result.stats, again.stats);
    assert_eq!(result.archive.objectives(), again.archive.objectives());
}

#[test]
fn zero_generations_archive_the_initial_front() {
    let (_, p) = small_problem(16, 40, 1);
    let cfg = EvolverConfig {
        num_generations: 0,
        ..small_config(1)
    };
    let r = run(&p, &cfg).unwrap();
    assert_eq!(r.stats.len(), 1);
    let pop: Vec<ObjectiveVector> = r.population.iter().map(|s| s.objectives).collect();
    for m in r.archive.objectives() {
        assert!(pop.contains(&m));
        assert!(!pop.iter().any(|o| o.dominates(&m)));
    }
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let (_, p) = small_problem(16, 40, 1);
    let cfg = small_config(9);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&p, &cfg).unwrap());
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run(&p, &cfg).unwrap());
    assert_eq!(one.stats, four.stats);
    assert_eq!(one.archive.objectives(), four.archive.objectives());
    for (a, b) in one.archive.members().iter().zip(four.archive.members()) {
        assert_eq!(a.genotype, b.genotype);
    }
}
