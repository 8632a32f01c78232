//! Scalar volumes, label masks and point-derived fields on regular grids.
//!
//! World coordinates follow `point_mm = origin_mm + index * spacing_mm`, so
//! `origin_mm` is the centre of voxel `(0, 0, 0)`. Voxel data is stored
//! x-fastest.

mod distance;
pub(crate) mod io;
mod points;

pub use distance::{distance_map_from_points, distance_map_brute_force};
pub use io::{load_label_mask, load_volume, save_label_mask, save_volume, header_path, raw_path, Dtype, VolumeHeader};
pub use points::{load_guidance, load_landmarks, save_guidance, save_landmarks, GuidancePair, GuidanceSet, LandmarkPair, LandmarkPairs};

use crate::geometry::{Aabb, Vec3};
use crate::{Error, Result};

/// Grid layout shared by volumes, masks, distance maps and DVFs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
}

/// Lower corner and interpolation fractions of the grid cell containing a
/// (clamped) world position.
#[derive(Debug, Clone, Copy)]
pub struct Cell {
    /// Linear index of the lower corner voxel.
    pub base: usize,
    /// Linear offsets to the next voxel along x, y, z (0 on single-voxel axes).
    pub offsets: [usize; 3],
    pub frac: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing_mm: [f64; 3], origin_mm: [f64; 3]) -> Result<Self> {
        let g = Self {
            dims,
            spacing_mm,
            origin_mm,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::Geometry(format!("zero dimension in {:?}", self.dims)));
        }
        if self.spacing_mm.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Geometry(format!(
                "non-positive spacing {:?}",
                self.spacing_mm
            )));
        }
        if self.origin_mm.iter().any(|o| !o.is_finite()) {
            return Err(Error::Geometry("non-finite origin".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let r = idx / self.dims[0];
        [i, r % self.dims[1], r / self.dims[1]]
    }

    #[inline]
    pub fn world(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            self.origin_mm[0] + i as f64 * self.spacing_mm[0],
            self.origin_mm[1] + j as f64 * self.spacing_mm[1],
            self.origin_mm[2] + k as f64 * self.spacing_mm[2],
        )
    }

    #[inline]
    pub fn continuous_index(&self, p: &Vec3) -> [f64; 3] {
        [
            (p.x - self.origin_mm[0]) / self.spacing_mm[0],
            (p.y - self.origin_mm[1]) / self.spacing_mm[1],
            (p.z - self.origin_mm[2]) / self.spacing_mm[2],
        ]
    }

    /// Nearest voxel to a world position, or `None` outside the grid.
    pub fn nearest_voxel(&self, p: &Vec3) -> Option<[usize; 3]> {
        let q = self.continuous_index(p);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = q[a].round();
            if r < 0.0 || r > (self.dims[a] - 1) as f64 || r.is_nan() {
                return None;
            }
            out[a] = r as usize;
        }
        Some(out)
    }

    pub fn voxel_volume_mm3(&self) -> f64 {
        self.spacing_mm.iter().product()
    }

    /// Physical extent of the image region, voxels treated as cells.
    pub fn extent_mm(&self) -> [f64; 3] {
        [
            self.dims[0] as f64 * self.spacing_mm[0],
            self.dims[1] as f64 * self.spacing_mm[1],
            self.dims[2] as f64 * self.spacing_mm[2],
        ]
    }

    /// Box covering all voxel cells (half a voxel beyond the outer centres).
    pub fn physical_bounds(&self) -> Aabb {
        let min = Vec3::new(
            self.origin_mm[0] - 0.5 * self.spacing_mm[0],
            self.origin_mm[1] - 0.5 * self.spacing_mm[1],
            self.origin_mm[2] - 0.5 * self.spacing_mm[2],
        );
        let e = self.extent_mm();
        Aabb::new(min, min + Vec3::new(e[0], e[1], e[2]))
    }

    /// Box spanned by the outermost voxel centres.
    pub fn center_bounds(&self) -> Aabb {
        Aabb::new(
            self.world(0, 0, 0),
            self.world(self.dims[0] - 1, self.dims[1] - 1, self.dims[2] - 1),
        )
    }

    #[inline]
    pub fn cell(&self, p: &Vec3) -> Cell {
        let q = self.continuous_index(p);
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        let mut offsets = [0usize; 3];
        let strides = [1, self.dims[0], self.dims[0] * self.dims[1]];
        for a in 0..3 {
            let n = self.dims[a];
            if n < 2 {
                continue;
            }
            let hi = (n - 1) as f64;
            // NaN clamps to 0 through max().
            let qa = q[a].max(0.0).min(hi);
            let i0 = (qa.floor() as usize).min(n - 2);
            base[a] = i0;
            frac[a] = qa - i0 as f64;
            offsets[a] = strides[a];
        }
        Cell {
            base: base[0] + strides[1] * base[1] + strides[2] * base[2],
            offsets,
            frac,
        }
    }

    pub fn same_as(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && close3(&self.spacing_mm, &other.spacing_mm)
            && close3(&self.origin_mm, &other.origin_mm)
    }

    pub fn ensure_same(&self, other: &Geometry) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GeometryMismatch(format!(
                "{:?} vs {:?}",
                self.dims, other.dims
            )))
        }
    }

    /// Number of voxels discarded per side for a margin in millimetres.
    pub fn margin_voxels(&self, margin_mm: f64) -> Result<[usize; 3]> {
        if !(margin_mm >= 0.0) {
            return Err(Error::InvalidParameter(format!("negative margin {margin_mm}")));
        }
        let mut out = [0usize; 3];
        for a in 0..3 {
            let m = margin_mm / self.spacing_mm[a];
            let n = if (m - m.round()).abs() < 1e-9 {
                m.round()
            } else {
                m.floor()
            } as usize;
            if 2 * n >= self.dims[a] {
                return Err(Error::InvalidParameter(format!(
                    "margin {margin_mm} mm leaves nothing on axis {a} ({} voxels)",
                    self.dims[a]
                )));
            }
            out[a] = n;
        }
        Ok(out)
    }

    /// Geometry of the interior region left after cropping.
    pub fn cropped(&self, margin: [usize; 3]) -> Geometry {
        let mut g = *self;
        for a in 0..3 {
            g.dims[a] = self.dims[a] - 2 * margin[a];
            g.origin_mm[a] = self.origin_mm[a] + margin[a] as f64 * self.spacing_mm[a];
        }
        g
    }
}

fn close3(a: &[f64; 3], b: &[f64; 3]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())))
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Trilinear interpolation of a voxel array at a precomputed cell.
#[inline]
pub fn interpolate<T: Copy + Into<f64>>(data: &[T], c: &Cell) -> f64 {
    let [ox, oy, oz] = c.offsets;
    let b = c.base;
    let v = |i: usize| -> f64 { data[i].into() };
    let [fx, fy, fz] = c.frac;
    let c00 = lerp(v(b), v(b + ox), fx);
    let c10 = lerp(v(b + oy), v(b + oy + ox), fx);
    let c01 = lerp(v(b + oz), v(b + oz + ox), fx);
    let c11 = lerp(v(b + oz + oy), v(b + oz + oy + ox), fx);
    lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
}

/// 3D scalar image.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub geometry: Geometry,
    pub data: Vec<f32>,
}

impl Volume {
    pub fn new(geometry: Geometry, data: Vec<f32>) -> Result<Self> {
        geometry.validate()?;
        if data.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                found: data.len(),
            });
        }
        Ok(Self { geometry, data })
    }

    pub fn filled(geometry: Geometry, value: f32) -> Self {
        Self {
            data: vec![value; geometry.len()],
            geometry,
        }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(Vec3) -> f32) -> Self {
        let mut data = Vec::with_capacity(geometry.len());
        for k in 0..geometry.dims[2] {
            for j in 0..geometry.dims[1] {
                for i in 0..geometry.dims[0] {
                    data.push(f(geometry.world(i, j, k)));
                }
            }
        }
        Self { geometry, data }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.geometry.index(i, j, k)]
    }

    /// Trilinear sample at a world position; positions outside the grid
    /// take the value of the nearest border.
    #[inline]
    pub fn sample(&self, p: &Vec3) -> f64 {
        interpolate(&self.data, &self.geometry.cell(p))
    }

    pub fn max_value(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Scales intensities into `[0, 1]`, keeping zero as background.
    pub fn normalized_unit(&self) -> Volume {
        let max = self.max_value();
        let scale = if max > 0.0 { 1.0 / max } else { 1.0 };
        Volume {
            geometry: self.geometry,
            data: self.data.iter().map(|&v| (v * scale).clamp(0.0, 1.0)).collect(),
        }
    }

    pub fn resample(&self, new_spacing_mm: [f64; 3]) -> Result<Volume> {
        if new_spacing_mm.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "non-positive spacing {new_spacing_mm:?}"
            )));
        }
        let g = &self.geometry;
        let ext = g.extent_mm();
        let start = g.physical_bounds().min;
        let mut dims = [0usize; 3];
        let mut origin = [0.0; 3];
        for a in 0..3 {
            let n = ext[a] / new_spacing_mm[a];
            let n = if (n - n.round()).abs() < 1e-9 { n.round() } else { n.floor() };
            dims[a] = (n as usize).max(1);
            origin[a] = start[a] + 0.5 * new_spacing_mm[a];
        }
        let ng = Geometry::new(dims, new_spacing_mm, origin)?;
        if ng.same_as(g) {
            return Ok(self.clone());
        }
        Ok(Volume::from_fn(ng, |p| self.sample(&p) as f32))
    }

    pub fn crop_margin(&self, margin_mm: f64) -> Result<Volume> {
        let m = self.geometry.margin_voxels(margin_mm)?;
        Ok(Volume {
            geometry: self.geometry.cropped(m),
            data: crop_data(&self.geometry, &self.data, m),
        })
    }
}

pub(crate) fn crop_data<T: Copy>(g: &Geometry, data: &[T], m: [usize; 3]) -> Vec<T> {
    let cg = g.cropped(m);
    let mut out = Vec::with_capacity(cg.len());
    for k in 0..cg.dims[2] {
        for j in 0..cg.dims[1] {
            let row = g.index(m[0], j + m[1], k + m[2]);
            out.extend_from_slice(&data[row..row + cg.dims[0]]);
        }
    }
    out
}

/// Binary object segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMask {
    pub geometry: Geometry,
    pub data: Vec<u8>,
    pub label: String,
}

impl LabelMask {
    pub fn new(geometry: Geometry, data: Vec<u8>, label: impl Into<String>) -> Result<Self> {
        geometry.validate()?;
        if data.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                found: data.len(),
            });
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidParameter("mask values must be 0 or 1".into()));
        }
        Ok(Self {
            geometry,
            data,
            label: label.into(),
        })
    }

    pub fn empty(geometry: Geometry, label: impl Into<String>) -> Self {
        Self {
            data: vec![0; geometry.len()],
            geometry,
            label: label.into(),
        }
    }

    pub fn from_fn(geometry: Geometry, label: impl Into<String>, mut f: impl FnMut(Vec3) -> bool) -> Self {
        let mut m = Self::empty(geometry, label);
        for idx in 0..geometry.len() {
            let [i, j, k] = geometry.unravel(idx);
            m.data[idx] = u8::from(f(geometry.world(i, j, k)));
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.data[self.geometry.index(i, j, k)] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    /// Nearest-neighbour lookup; outside the grid counts as background.
    pub fn contains_point(&self, p: &Vec3) -> bool {
        self.geometry
            .nearest_voxel(p)
            .is_some_and(|[i, j, k]| self.get(i, j, k))
    }

    pub fn crop_margin(&self, margin_mm: f64) -> Result<LabelMask> {
        let m = self.geometry.margin_voxels(margin_mm)?;
        Ok(LabelMask {
            geometry: self.geometry.cropped(m),
            data: crop_data(&self.geometry, &self.data, m),
            label: self.label.clone(),
        })
    }

    pub fn to_volume(&self) -> Volume {
        Volume {
            geometry: self.geometry,
            data: self.data.iter().map(|&v| f32::from(v)).collect(),
        }
    }
}

/// Per-voxel Euclidean distance (mm) to a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMap {
    pub geometry: Geometry,
    pub data: Vec<f64>,
}

impl DistanceMap {
    #[inline]
    pub fn sample(&self, p: &Vec3) -> f64 {
        interpolate(&self.data, &self.geometry.cell(p))
    }
}
