//! Exact Euclidean distance maps to arbitrary (off-grid) point sets.
//!
//! For every x-line of the grid the squared distance to point `p` is the
//! parabola `(x - p.x)^2 + c_p` with `c_p = (y - p.y)^2 + (z - p.z)^2`. The
//! lower envelope of those parabolas is built once per line in linear time
//! (points pre-sorted by x), then swept along the line. The final value at a
//! voxel is re-evaluated with the same expression as a direct scan, checking
//! the envelope neighbours of the winner so near-ties resolve identically.

use super::{DistanceMap, Geometry};
use crate::geometry::Vec3;
use crate::{Error, Result};

#[inline]
fn sq_dist(q: &Vec3, p: &Vec3) -> f64 {
    let dx = q.x - p.x;
    let dy = q.y - p.y;
    let dz = q.z - p.z;
    dx * dx + dy * dy + dz * dz
}

pub fn distance_map_from_points(points: &[Vec3], geometry: &Geometry) -> Result<DistanceMap> {
    if points.is_empty() {
        return Err(Error::Empty("distance map needs at least one point".into()));
    }
    geometry.validate()?;
    let mut sorted: Vec<Vec3> = points.to_vec();
    sorted.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z)));

    let [nx, ny, nz] = geometry.dims;
    let mut data = vec![0.0f64; geometry.len()];
    let mut offsets = vec![0.0f64; sorted.len()];
    let mut hull: Vec<usize> = Vec::with_capacity(sorted.len());
    let mut breaks: Vec<f64> = Vec::with_capacity(sorted.len() + 1);
    let xs: Vec<f64> = (0..nx)
        .map(|i| geometry.origin_mm[0] + i as f64 * geometry.spacing_mm[0])
        .collect();

    for k in 0..nz {
        for j in 0..ny {
            let base = geometry.world(0, j, k);
            for (o, p) in offsets.iter_mut().zip(&sorted) {
                let dy = base.y - p.y;
                let dz = base.z - p.z;
                *o = dy * dy + dz * dz;
            }
            lower_envelope(&sorted, &offsets, &mut hull, &mut breaks);
            let row = geometry.index(0, j, k);
            let mut seg = 0usize;
            for (i, &x) in xs.iter().enumerate() {
                while seg + 1 < hull.len() && breaks[seg + 1] < x {
                    seg += 1;
                }
                let q = Vec3::new(x, base.y, base.z);
                let lo = seg.saturating_sub(1);
                let hi = (seg + 1).min(hull.len() - 1);
                let mut best = f64::INFINITY;
                for &h in &hull[lo..=hi] {
                    best = best.min(sq_dist(&q, &sorted[h]));
                }
                data[row + i] = best.sqrt();
            }
        }
    }
    Ok(DistanceMap {
        geometry: *geometry,
        data,
    })
}

/// Lower envelope of `(x - p_i.x)^2 + c_i`; `breaks[s]` is where segment `s`
/// starts.
fn lower_envelope(pts: &[Vec3], c: &[f64], hull: &mut Vec<usize>, breaks: &mut Vec<f64>) {
    hull.clear();
    breaks.clear();
    for q in 0..pts.len() {
        let qx = pts[q].x;
        let qv = c[q] + qx * qx;
        loop {
            let Some(&top) = hull.last() else {
                hull.push(q);
                breaks.push(f64::NEG_INFINITY);
                break;
            };
            let tx = pts[top].x;
            if qx == tx {
                if c[q] >= c[top] {
                    break; // never below the current top
                }
                hull.pop();
                breaks.pop();
                continue;
            }
            let s = (qv - (c[top] + tx * tx)) / (2.0 * (qx - tx));
            if s <= *breaks.last().unwrap() {
                hull.pop();
                breaks.pop();
                continue;
            }
            hull.push(q);
            breaks.push(s);
            break;
        }
    }
}

/// Direct O(voxels x points) scan; reference implementation for tests.
pub fn distance_map_brute_force(points: &[Vec3], geometry: &Geometry) -> Result<DistanceMap> {
    if points.is_empty() {
        return Err(Error::Empty("distance map needs at least one point".into()));
    }
    let mut data = vec![0.0; geometry.len()];
    for (idx, d) in data.iter_mut().enumerate() {
        let [i, j, k] = geometry.unravel(idx);
        let q = geometry.world(i, j, k);
        *d = points
            .iter()
            .map(|p| sq_dist(&q, p))
            .fold(f64::INFINITY, f64::min)
            .sqrt();
    }
    Ok(DistanceMap {
        geometry: *geometry,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point_at_voxel_center() {
        let g = Geometry::new([5, 6, 7], [1.0, 1.5, 0.5], [0.0; 3]).unwrap();
        let c = g.world(2, 3, 4);
        let m = distance_map_from_points(&[c], &g).unwrap();
        for idx in 0..g.len() {
            let [i, j, k] = g.unravel(idx);
            assert_eq!(m.data[idx], (g.world(i, j, k) - c).norm_squared().sqrt());
        }
        assert_eq!(m.data[g.index(2, 3, 4)], 0.0);
    }

    #[test]
    fn two_points_is_pointwise_min() {
        let g = Geometry::new([8, 8, 8], [1.0; 3], [0.0; 3]).unwrap();
        let a = Vec3::new(1.3, 2.2, 7.9);
        let b = Vec3::new(6.0, 5.5, 0.25);
        let ma = distance_map_from_points(&[a], &g).unwrap();
        let mb = distance_map_from_points(&[b], &g).unwrap();
        let mab = distance_map_from_points(&[a, b], &g).unwrap();
        for i in 0..g.len() {
            assert_eq!(mab.data[i], ma.data[i].min(mb.data[i]));
        }
    }

    #[test]
    fn matches_brute_force_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Geometry::new([32, 32, 32], [1.0, 1.25, 0.8], [-4.0, 1.0, 2.0]).unwrap();
        let pts: Vec<Vec3> = (0..50)
            .map(|_| Vec3::new(rng.random_range(-6.0..30.0), rng.random_range(0.0..42.0), rng.random_range(0.0..28.0)))
            .collect();
        let fast = distance_map_from_points(&pts, &g).unwrap();
        let slow = distance_map_brute_force(&pts, &g).unwrap();
        assert_eq!(fast.data, slow.data);
    }

    #[test]
    fn duplicate_x_coordinates() {
        let g = Geometry::new([10, 4, 4], [1.0; 3], [0.0; 3]).unwrap();
        let pts = vec![
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(3.0, 3.0, 3.0),
            Vec3::new(3.0, 1.0, 2.0),
            Vec3::new(7.0, 2.0, 2.0),
        ];
        let fast = distance_map_from_points(&pts, &g).unwrap();
        let slow = distance_map_brute_force(&pts, &g).unwrap();
        assert_eq!(fast.data, slow.data);
    }

    #[test]
    fn empty_points_error() {
        let g = Geometry::new([2, 2, 2], [1.0; 3], [0.0; 3]).unwrap();
        assert!(distance_map_from_points(&[], &g).is_err());
    }
}
