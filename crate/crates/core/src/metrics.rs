//! Registration quality metrics: Dice overlap, (percentile) Hausdorff
//! distance between mask surfaces, landmark error and margin cropping.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, Vec3};
use crate::mesh::{transform_point, DeformationVectorField, Direction, DualMeshGenotype};
use crate::volume::{LabelMask, LandmarkPairs};
use crate::{Error, Result};

pub const DEFAULT_MARGIN_MM: f64 = 15.0;

/// `2|A∩B| / (|A|+|B|)`, 1 when both masks are empty.
pub fn dice(a: &LabelMask, b: &LabelMask) -> Result<f64> {
    a.geometry.ensure_same(&b.geometry)?;
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data.iter().zip(&b.data) {
        na += usize::from(x != 0);
        nb += usize::from(y != 0);
        both += usize::from(x != 0 && y != 0);
    }
    Ok(if na + nb == 0 { 1.0 } else { 2.0 * both as f64 / (na + nb) as f64 })
}

/// Centres of foreground voxels with a background or out-of-grid
/// 6-neighbour.
pub fn surface_points_from_mask(m: &LabelMask) -> Result<Vec<Vec3>> {
    let g = &m.geometry;
    let [nx, ny, nz] = g.dims;
    let mut out = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if !m.get(i, j, k) {
                    continue;
                }
                let border = i == 0 || j == 0 || k == 0 || i + 1 == nx || j + 1 == ny || k + 1 == nz;
                if border
                    || !m.get(i - 1, j, k)
                    || !m.get(i + 1, j, k)
                    || !m.get(i, j - 1, k)
                    || !m.get(i, j + 1, k)
                    || !m.get(i, j, k - 1)
                    || !m.get(i, j, k + 1)
                {
                    out.push(g.world(i, j, k));
                }
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("mask {:?} has no foreground", m.label)));
    }
    Ok(out)
}

/// Uniform bucket grid for exact nearest-neighbour queries.
struct Buckets<'a> {
    points: &'a [Vec3],
    min: Vec3,
    cell: f64,
    dims: [usize; 3],
    start: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> Buckets<'a> {
    fn new(points: &'a [Vec3]) -> Self {
        let b = Aabb::from_points(points).expect("non-empty point set");
        let size = b.size();
        let longest = size.x.max(size.y).max(size.z);
        let spans: Vec<f64> = (0..3).map(|a| size[a]).filter(|&e| e > 1e-9 * longest).collect();
        let cell = if spans.is_empty() {
            1.0
        } else {
            let measure: f64 = spans.iter().product();
            2.0 * (measure / points.len() as f64).powf(1.0 / spans.len() as f64)
        };
        let cell = cell.max(longest / 1024.0).max(1e-9);
        let dims = [0, 1, 2].map(|a| ((size[a] / cell).floor() as usize + 1).min(1 << 10));
        let key = |p: &Vec3| {
            let c = [0, 1, 2].map(|a| (((p[a] - b.min[a]) / cell) as usize).min(dims[a] - 1));
            c[0] + dims[0] * (c[1] + dims[1] * c[2])
        };
        let mut count = vec![0usize; dims[0] * dims[1] * dims[2] + 1];
        for p in points {
            count[key(p) + 1] += 1;
        }
        for i in 1..count.len() {
            count[i] += count[i - 1];
        }
        let mut fill = count.clone();
        let mut items = vec![0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let k = key(p);
            items[fill[k]] = i;
            fill[k] += 1;
        }
        Self {
            points,
            min: b.min,
            cell,
            dims,
            start: count,
            items,
        }
    }

    /// Squared distance from `q` to the nearest point.
    fn nearest_sq(&self, q: &Vec3) -> f64 {
        let c = [0, 1, 2].map(|a| (((q[a] - self.min[a]) / self.cell).floor().max(0.0) as i64).min(self.dims[a] as i64 - 1));
        let mut best = f64::INFINITY;
        let max_r = *self.dims.iter().max().expect("three axes") as i64;
        for r in 0..=max_r {
            // Every point in shell r is at least (r - 1) cells away, also
            // for queries outside the grid (clamped onto its border).
            let reach = (r - 1).max(0) as f64 * self.cell;
            if reach * reach > best {
                break;
            }
            let range = |a: usize| (c[a] - r).max(0)..=(c[a] + r).min(self.dims[a] as i64 - 1);
            for z in range(2) {
                for y in range(1) {
                    let inner = (z - c[2]).abs() != r && (y - c[1]).abs() != r;
                    let mut visit = |x: i64| {
                        if x < 0 || x >= self.dims[0] as i64 {
                            return;
                        }
                        let k = x as usize + self.dims[0] * (y as usize + self.dims[1] * z as usize);
                        for &i in &self.items[self.start[k]..self.start[k + 1]] {
                            best = best.min((self.points[i] - q).norm_squared());
                        }
                    };
                    if inner {
                        visit(c[0] - r);
                        visit(c[0] + r);
                    } else {
                        range(0).for_each(&mut visit);
                    }
                }
            }
        }
        best
    }
}

/// Distance from every point of `a` to the nearest point of `b`.
pub fn directed_distances(a: &[Vec3], b: &[Vec3]) -> Vec<f64> {
    let grid = Buckets::new(b);
    a.par_iter().map(|p| grid.nearest_sq(p).sqrt()).collect()
}

/// Nearest-rank percentile of unsorted values.
pub fn percentile(values: &mut [f64], pct: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = ((pct / 100.0) * n as f64).ceil() as usize;
    values[rank.clamp(1, n) - 1]
}

/// Symmetrized percentile Hausdorff distance (100 = classic Hausdorff).
pub fn hausdorff(a: &[Vec3], b: &[Vec3], pct: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("hausdorff needs two non-empty point sets".into()));
    }
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::InvalidParameter(format!("percentile {pct}")));
    }
    let mut ab = directed_distances(a, b);
    let mut ba = directed_distances(b, a);
    Ok(percentile(&mut ab, pct).max(percentile(&mut ba, pct)))
}

/// O(|a|·|b|) reference for tests.
pub fn hausdorff_brute_force(a: &[Vec3], b: &[Vec3], pct: f64) -> f64 {
    let dir = |x: &[Vec3], y: &[Vec3]| {
        let mut d: Vec<f64> = x
            .iter()
            .map(|p| y.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt())
            .collect();
        percentile(&mut d, pct)
    };
    dir(a, b).max(dir(b, a))
}

/// Pulls a mask back through an inverse field with nearest-neighbour
/// lookup: `out(v) = m(v + u(v))`.
pub fn warp_mask(m: &LabelMask, inverse: &DeformationVectorField) -> Result<LabelMask> {
    m.geometry.ensure_same(&inverse.geometry)?;
    if inverse.direction != Direction::Inverse {
        return Err(Error::InvalidParameter("mask warping needs an inverse field".into()));
    }
    let g = m.geometry;
    Ok(LabelMask::from_fn(g, m.label.clone(), |p| {
        let [i, j, k] = g.nearest_voxel(&p).expect("voxel centre");
        m.contains_point(&(p + inverse.get(i, j, k)))
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandmarkStats {
    pub count: usize,
    pub mean_mm: f64,
    /// Population standard deviation.
    pub sd_mm: f64,
}

/// Distances between forward-transformed source landmarks and their
/// targets.
pub fn landmark_distances(pairs: &LandmarkPairs, g: &DualMeshGenotype) -> Result<Vec<f64>> {
    pairs
        .pairs
        .iter()
        .map(|p| Ok((transform_point(g, &p.source, Direction::Forward)? - p.target).norm()))
        .collect()
}

pub fn landmark_error(pairs: &LandmarkPairs, g: &DualMeshGenotype) -> Result<LandmarkStats> {
    let d = landmark_distances(pairs, g)?;
    if d.is_empty() {
        return Err(Error::Empty("no landmark pairs".into()));
    }
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Ok(LandmarkStats {
        count: d.len(),
        mean_mm: mean,
        sd_mm: var.sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMetrics {
    pub label: String,
    pub dice: f64,
    /// `None` when either cropped mask is empty.
    pub hausdorff_mm: Option<f64>,
    pub hausdorff95_mm: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldError {
    pub mean_mm: f64,
    pub p95_mm: f64,
    pub voxels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub margin_mm: f64,
    pub labels: Vec<LabelMetrics>,
    pub landmarks: Option<LandmarkStats>,
    pub field_error: Option<FieldError>,
}

/// Dice and Hausdorff per label pair after cropping `margin_mm` off every
/// border.
pub fn compare_masks(pairs: &[(&LabelMask, &LabelMask)], margin_mm: f64) -> Result<Vec<LabelMetrics>> {
    pairs
        .iter()
        .map(|(a, b)| {
            let a = a.crop_margin(margin_mm)?;
            let b = b.crop_margin(margin_mm)?;
            let d = dice(&a, &b)?;
            let (h, h95) = match (surface_points_from_mask(&a), surface_points_from_mask(&b)) {
                (Ok(sa), Ok(sb)) => (Some(hausdorff(&sa, &sb, 100.0)?), Some(hausdorff(&sa, &sb, 95.0)?)),
                _ => (None, None),
            };
            Ok(LabelMetrics {
                label: a.label.clone(),
                dice: d,
                hausdorff_mm: h,
                hausdorff95_mm: h95,
            })
        })
        .collect()
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn csv_header() -> &'static str {
        "label,dice,hausdorff_mm,hausdorff95_mm,margin_mm"
    }

    /// One row per label.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
        let mut s = format!("{}\n", Self::csv_header());
        for l in &self.labels {
            s += &format!(
                "{},{},{},{},{}\n",
                l.label,
                l.dice,
                opt(l.hausdorff_mm),
                opt(l.hausdorff95_mm),
                self.margin_mm
            );
        }
        s
    }
}
