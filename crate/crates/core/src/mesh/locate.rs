//! Barycentric coordinates, point location and the mesh transforms.

use super::{Direction, DualMeshGenotype, Side};
use crate::geometry::Vec3;
use crate::{Error, Result};

/// Weights below this still count as inside.
pub const INSIDE_EPS: f64 = 1e-9;

/// Weights `w` with `Σ w = 1` and `Σ w_i p_i = q`.
#[inline]
pub fn barycentric_coords(p: &[Vec3; 4], q: &Vec3) -> Result<[f64; 4]> {
    let a = p[1] - p[0];
    let b = p[2] - p[0];
    let c = p[3] - p[0];
    let bc = b.cross(&c);
    let det = a.dot(&bc);
    let scale = a.norm() * b.norm() * c.norm();
    if !(det.abs() > 1e-14 * scale) {
        return Err(Error::DegenerateTet(det / 6.0));
    }
    let r = q - p[0];
    let inv = 1.0 / det;
    let l1 = r.dot(&bc) * inv;
    let l2 = a.dot(&r.cross(&c)) * inv;
    let l3 = a.dot(&b.cross(&r)) * inv;
    Ok([1.0 - l1 - l2 - l3, l1, l2, l3])
}

#[inline]
fn is_inside(w: &[f64; 4]) -> bool {
    w.iter().all(|&x| x >= -INSIDE_EPS)
}

/// Walking point locator remembering the last tet it hit.
#[derive(Debug, Clone)]
pub struct Locator<'a> {
    g: &'a DualMeshGenotype,
    side: Side,
    last: usize,
}

impl<'a> Locator<'a> {
    pub fn new(g: &'a DualMeshGenotype, side: Side) -> Self {
        Self { g, side, last: 0 }
    }

    /// Containing tet and its weights, or `None` outside the hull.
    pub fn locate(&mut self, q: &Vec3) -> Option<(usize, [f64; 4])> {
        let n = self.g.topology.num_tets();
        if n == 0 {
            return None;
        }
        let mut t = self.last.min(n - 1);
        for _ in 0..n {
            let w = match barycentric_coords(&self.g.tet_points(self.side, t), q) {
                Ok(w) => w,
                Err(_) => break,
            };
            if is_inside(&w) {
                self.last = t;
                return Some((t, w));
            }
            let mut face = 0;
            for i in 1..4 {
                if w[i] < w[face] {
                    face = i;
                }
            }
            match self.g.topology.neighbor(t, face) {
                Some(u) => t = u,
                None => break,
            }
        }
        let hit = brute_force(self.g, self.side, q);
        if let Some((t, _)) = hit {
            self.last = t;
        }
        hit
    }
}

fn brute_force(g: &DualMeshGenotype, side: Side, q: &Vec3) -> Option<(usize, [f64; 4])> {
    (0..g.topology.num_tets()).find_map(|t| {
        barycentric_coords(&g.tet_points(side, t), q)
            .ok()
            .filter(is_inside)
            .map(|w| (t, w))
    })
}

/// A tet of `side` containing `q`, or `None` outside the hull.
pub fn locate_point(g: &DualMeshGenotype, side: Side, q: &Vec3) -> Option<usize> {
    Locator::new(g, side).locate(q).map(|(t, _)| t)
}

/// Lowest-index tet containing `q` by exhaustive scan.
pub fn locate_point_brute_force(g: &DualMeshGenotype, side: Side, q: &Vec3) -> Option<usize> {
    brute_force(g, side, q).map(|(t, _)| t)
}

/// Applies the weights of `q` in the from-side tet to the to-side tet.
pub fn transform_point(g: &DualMeshGenotype, q: &Vec3, direction: Direction) -> Result<Vec3> {
    let from = direction.from_side();
    let (t, w) = Locator::new(g, from).locate(q).ok_or(Error::OutsideHull {
        x: q.x,
        y: q.y,
        z: q.z,
    })?;
    Ok(apply_weights(&g.tet_points(from.other(), t), &w))
}

#[inline]
pub(crate) fn apply_weights(p: &[Vec3; 4], w: &[f64; 4]) -> Vec3 {
    p[0] * w[0] + p[1] * w[1] + p[2] * w[2] + p[3] * w[3]
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::mesh::TetTopology;

    fn unit() -> [Vec3; 4] {
        [
            Vec3::zeros(),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
        ]
    }

    #[test]
    fn barycentric_cases() {
        let p = unit();
        assert_eq!(barycentric_coords(&p, &p[0]).unwrap(), [1.0, 0.0, 0.0, 0.0]);
        let c = (p[0] + p[1] + p[2] + p[3]) / 4.0;
        let w = barycentric_coords(&p, &c).unwrap();
        for x in w {
            assert!((x - 0.25).abs() < 1e-15);
        }
        let w = barycentric_coords(&p, &Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert!(w.iter().any(|&x| x < 0.0));
        let flat = [p[0], p[1], p[2], Vec3::new(0.5, 0.5, 0.0)];
        assert!(barycentric_coords(&flat, &c).is_err());
    }

    #[test]
    fn translation_and_identity_transforms() {
        let topo = Arc::new(TetTopology::new(4, vec![[0, 1, 2, 3]]).unwrap());
        let pts = unit().to_vec();
        let mut g = DualMeshGenotype::identity(topo, pts.clone()).unwrap();
        let q = Vec3::new(0.2, 0.3, 0.1);
        assert_eq!(transform_point(&g, &q, Direction::Forward).unwrap(), q);
        let t = Vec3::new(1.5, -2.0, 0.25);
        for p in g.target.iter_mut() {
            *p += t;
        }
        let f = transform_point(&g, &q, Direction::Forward).unwrap();
        assert!((f - (q + t)).norm() < 1e-12);
        let b = transform_point(&g, &f, Direction::Inverse).unwrap();
        assert!((b - q).norm() < 1e-12);
        assert!(transform_point(&g, &Vec3::new(5.0, 5.0, 5.0), Direction::Forward).is_err());
        assert_eq!(locate_point(&g, Side::Source, &Vec3::new(-50.0, 0.0, 0.0)), None);
    }
}
