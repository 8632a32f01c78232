//! Exact three-objective hypervolume by sweeping the third objective over
//! incrementally maintained two-objective fronts.

use crate::{Error, Result};

/// Area dominated by a staircase sorted by x ascending (y descending).
fn area2(front: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut a = 0.0;
    for (i, p) in front.iter().enumerate() {
        let next_x = front.get(i + 1).map_or(reference[0], |q| q[0]);
        a += (next_x - p[0]) * (reference[1] - p[1]);
    }
    a
}

/// Inserts `p` keeping only mutually non-dominated points.
fn insert2(front: &mut Vec<[f64; 2]>, p: [f64; 2]) {
    let pos = front.partition_point(|q| q[0] < p[0] || (q[0] == p[0] && q[1] < p[1]));
    if pos > 0 && front[pos - 1][1] <= p[1] {
        return;
    }
    if pos < front.len() && front[pos][0] == p[0] && front[pos][1] <= p[1] {
        return;
    }
    let mut end = pos;
    while end < front.len() && front[end][1] >= p[1] {
        end += 1;
    }
    front.splice(pos..end, [p]);
}

/// Volume dominated by `points` and bounded by `reference` (minimization).
/// Every point must be strictly better than the reference in all objectives.
pub fn hypervolume3(points: &[[f64; 3]], reference: [f64; 3]) -> Result<f64> {
    if points.iter().any(|p| (0..3).any(|a| !(p[a] < reference[a]))) {
        return Err(Error::ReferencePoint);
    }
    Ok(sweep(points, reference))
}

/// As [`hypervolume3`], ignoring points that do not dominate the reference.
pub fn hypervolume3_clipped(points: &[[f64; 3]], reference: [f64; 3]) -> f64 {
    let inside: Vec<[f64; 3]> = points
        .iter()
        .copied()
        .filter(|p| (0..3).all(|a| p[a] < reference[a]))
        .collect();
    sweep(&inside, reference)
}

fn sweep(points: &[[f64; 3]], reference: [f64; 3]) -> f64 {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a[2].total_cmp(&b[2]).then(a[0].total_cmp(&b[0])).then(a[1].total_cmp(&b[1])));
    let mut front: Vec<[f64; 2]> = Vec::new();
    let mut volume = 0.0;
    for (i, p) in sorted.iter().enumerate() {
        insert2(&mut front, [p[0], p[1]]);
        let z_next = sorted.get(i + 1).map_or(reference[2], |q| q[2]);
        if z_next > p[2] {
            volume += area2(&front, [reference[0], reference[1]]) * (z_next - p[2]);
        }
    }
    volume
}
