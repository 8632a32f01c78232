mod common;

use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

use common::{random_genotype, random_points, rng, unit_box};
use rand::Rng;
use tetreg::mesh::{barycentric_coords, locate_point, locate_point_brute_force, tet_signed_volume, transform_point, Direction, Side};
use tetreg::meshgen::delaunay_tetrahedralize;
use tetreg::Vec3;

fn circumsphere(p: &[Vec3; 4]) -> (Vec3, f64) {
    let rows: Vec<Vector3<f64>> = (1..4).map(|i| p[i] - p[0]).collect();
    let a = Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);
    let b = Vector3::new(rows[0].norm_squared(), rows[1].norm_squared(), rows[2].norm_squared()) * 0.5;
    let c = a.lu().solve(&b).unwrap();
    (p[0] + c, c.norm())
}

fn assert_empty_circumspheres(points: &[Vec3], tets: &[[u32; 4]]) {
    for t in tets {
        let p = t.map(|i| points[i as usize]);
        let (c, r) = circumsphere(&p);
        for (i, q) in points.iter().enumerate() {
            if t.contains(&(i as u32)) {
                continue;
            }
            assert!((q - c).norm() >= r * (1.0 - 1e-9), "point {i} inside circumsphere of {t:?}");
        }
    }
}

#[test]
fn delaunay_empty_circumsphere_on_random_sets() {
    for seed in 0..20 {
        let pts = random_points(100, seed);
        let d = delaunay_tetrahedralize(&pts, Some(&unit_box())).unwrap();
        assert_empty_circumspheres(&d.points, d.topology.tets());
        let vol: f64 = (0..d.topology.num_tets())
            .map(|t| tet_signed_volume(&d.topology.tet(t).map(|i| d.points[i as usize])).abs())
            .sum();
        assert!((vol - 24.0f64.powi(3)).abs() < 1e-6 * vol);
    }
}

#[test]
fn locate_agrees_with_exhaustive_scan() {
    let g = random_genotype(60, 7);
    let mut r = rng(99);
    for _ in 0..1000 {
        let q = Vec3::new(r.random_range(-12.0..12.0), r.random_range(-12.0..12.0), r.random_range(-12.0..12.0));
        let a = locate_point(&g, Side::Source, &q).expect("inside the box");
        let b = locate_point_brute_force(&g, Side::Source, &q).expect("inside the box");
        if a != b {
            for t in [a, b] {
                let w = barycentric_coords(&g.tet_points(Side::Source, t), &q).unwrap();
                assert!(w.iter().all(|&x| x >= -1e-9));
            }
        }
    }
    assert!(locate_point(&g, Side::Source, &Vec3::repeat(20.0)).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn barycentric_reconstruction(
        coords in prop::array::uniform4(prop::array::uniform3(-50.0f64..50.0)),
        w in prop::array::uniform4(0.01f64..1.0),
    ) {
        let p = coords.map(|c| Vec3::new(c[0], c[1], c[2]));
        prop_assume!(tet_signed_volume(&p).abs() > 1.0);
        let s: f64 = w.iter().sum();
        let w = w.map(|x| x / s);
        let q = p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + p[3] * w[3];
        let b = barycentric_coords(&p, &q).unwrap();
        let back = p[0] * b[0] + p[1] * b[1] + p[2] * b[2] + p[3] * b[3];
        prop_assert!((back - q).norm() < 1e-9);
        prop_assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swapping_two_vertices_flips_the_sign(coords in prop::array::uniform4(prop::array::uniform3(-5.0f64..5.0))) {
        let p = coords.map(|c| Vec3::new(c[0], c[1], c[2]));
        let q = [p[1], p[0], p[2], p[3]];
        prop_assert!((tet_signed_volume(&p) + tet_signed_volume(&q)).abs() <= 1e-12 * (1.0 + tet_signed_volume(&p).abs()));
    }

    #[test]
    fn delaunay_property_on_small_sets(seed in 0u64..10_000, n in 5usize..40) {
        let pts = random_points(n, seed);
        let d = delaunay_tetrahedralize(&pts, Some(&unit_box())).unwrap();
        prop_assert_eq!(d.points.len(), n + 8);
        assert_empty_circumspheres(&d.points, d.topology.tets());
    }

    #[test]
    fn identity_transform_is_exact(seed in 0u64..1000, q in prop::array::uniform3(-11.0f64..11.0)) {
        let g = random_genotype(20, seed);
        let q = Vec3::new(q[0], q[1], q[2]);
        let f = transform_point(&g, &q, Direction::Forward).unwrap();
        prop_assert!((f - q).norm() < 1e-9);
    }
}
