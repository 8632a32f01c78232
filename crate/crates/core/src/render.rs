//! Slice renders as binary portable pixel maps (PGM/PPM).
//!
//! A slice at `index` along `axis` maps voxel `(i, j, k)` to pixel
//! `(u, v)` with `u` the first and `v` the second remaining axis in
//! x, y, z order; row 0 is the lowest `v`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::mesh::DeformationVectorField;
use crate::volume::{Geometry, LabelMask, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" | "0" => Ok(Axis::X),
            "y" | "Y" | "1" => Ok(Axis::Y),
            "z" | "Z" | "2" => Ok(Axis::Z),
            _ => Err(Error::InvalidParameter(format!("unknown slice axis {s:?}"))),
        }
    }
}

impl Axis {
    fn normal(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// In-plane axes `(u, v)`.
    fn plane(self) -> (usize, usize) {
        match self {
            Axis::X => (1, 2),
            Axis::Y => (0, 2),
            Axis::Z => (0, 1),
        }
    }
}

/// One slice of a grid, resolved to pixel dimensions.
#[derive(Debug, Clone, Copy)]
pub struct Slice {
    pub axis: Axis,
    pub index: usize,
    pub width: usize,
    pub height: usize,
}

impl Slice {
    pub fn new(geometry: &Geometry, axis: Axis, index: usize) -> Result<Self> {
        let len = geometry.dims[axis.normal()];
        if index >= len {
            return Err(Error::SliceOutOfRange { index, len });
        }
        let (u, v) = axis.plane();
        Ok(Self {
            axis,
            index,
            width: geometry.dims[u],
            height: geometry.dims[v],
        })
    }

    pub fn voxel(&self, u: usize, v: usize) -> [usize; 3] {
        let mut ijk = [0; 3];
        let (a, b) = self.axis.plane();
        ijk[self.axis.normal()] = self.index;
        ijk[a] = u;
        ijk[b] = v;
        ijk
    }

    /// In-plane components of a vector, in voxel units.
    fn project(&self, geometry: &Geometry, d: &Vec3) -> (f64, f64) {
        let (a, b) = self.axis.plane();
        (d[a] / geometry.spacing_mm[a], d[b] / geometry.spacing_mm[b])
    }
}

/// 8-bit grayscale (1 channel) or RGB (3 channels) raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn gray(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            channels: 1,
            data: vec![value; width * height],
        }
    }

    pub fn rgb(width: usize, height: usize, color: [u8; 3]) -> Self {
        let data = (0..width * height).flat_map(|_| color).collect();
        Self {
            width,
            height,
            channels: 3,
            data,
        }
    }

    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.iter().flat_map(|&g| [g, g, g]).collect(),
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let at = (y * self.width + x) * self.channels;
        &self.data[at..at + self.channels]
    }

    pub fn set(&mut self, x: usize, y: usize, color: [u8; 3]) {
        let at = (y * self.width + x) * self.channels;
        if self.channels == 1 {
            self.data[at] = color[0];
        } else {
            self.data[at..at + 3].copy_from_slice(&color);
        }
    }

    /// Sets a pixel given signed coordinates; out-of-frame pixels are skipped.
    fn plot(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.set(x as usize, y as usize, color);
        }
    }

    /// Bresenham segment between rounded endpoints.
    pub fn line(&mut self, from: (f64, f64), to: (f64, f64), color: [u8; 3]) {
        let (mut x0, mut y0) = (from.0.round() as i64, from.1.round() as i64);
        let (x1, y1) = (to.0.round() as i64, to.1.round() as i64);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.plot(x0, y0, color);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }

    /// Nearest-neighbour magnification by an integer factor.
    pub fn upscale(&self, factor: usize) -> Image {
        let factor = factor.max(1);
        let (w, h) = (self.width * factor, self.height * factor);
        let mut data = Vec::with_capacity(w * h * self.channels);
        for y in 0..h {
            for x in 0..w {
                data.extend_from_slice(self.pixel(x / factor, y / factor));
            }
        }
        Image {
            width: w,
            height: h,
            channels: self.channels,
            data,
        }
    }

    /// Binary `P5` (grayscale) or `P6` (RGB) encoding.
    pub fn encode(&self) -> Vec<u8> {
        let magic = if self.channels == 1 { "P5" } else { "P6" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.data);
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }
}

pub const PALETTE: [[u8; 3]; 6] = [
    [255, 64, 64],
    [64, 255, 64],
    [80, 140, 255],
    [255, 220, 0],
    [255, 0, 255],
    [0, 230, 230],
];

/// Grayscale slice, intensities scaled linearly from the volume's
/// minimum (black) to maximum (white).
pub fn render_slice(volume: &Volume, axis: Axis, index: usize) -> Result<Image> {
    let g = &volume.geometry;
    let slice = Slice::new(g, axis, index)?;
    let lo = volume.data.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = volume.data.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let range = if hi > lo { (hi - lo) as f64 } else { 1.0 };
    let mut img = Image::gray(slice.width, slice.height, 0);
    for v in 0..slice.height {
        for u in 0..slice.width {
            let [i, j, k] = slice.voxel(u, v);
            let t = ((volume.get(i, j, k) - lo) as f64 / range).clamp(0.0, 1.0);
            img.set(u, v, [(t * 255.0).round() as u8; 3]);
        }
    }
    Ok(img)
}

/// In-slice outline pixels of a mask: inside voxels with a 4-neighbour
/// outside the mask or the frame.
pub fn contour_pixels(mask: &LabelMask, axis: Axis, index: usize) -> Result<Vec<(usize, usize)>> {
    let slice = Slice::new(&mask.geometry, axis, index)?;
    let inside = |u: i64, v: i64| {
        if u < 0 || v < 0 || u as usize >= slice.width || v as usize >= slice.height {
            return false;
        }
        let [i, j, k] = slice.voxel(u as usize, v as usize);
        mask.get(i, j, k)
    };
    let mut out = Vec::new();
    for v in 0..slice.height as i64 {
        for u in 0..slice.width as i64 {
            if inside(u, v)
                && [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .any(|(du, dv)| !inside(u + du, v + dv))
            {
                out.push((u as usize, v as usize));
            }
        }
    }
    Ok(out)
}

/// Colour-indexed outlines of `masks` drawn over `base` (mask `n` uses
/// `PALETTE[n % 6]`).
pub fn overlay_contours(base: &Image, masks: &[&LabelMask], axis: Axis, index: usize) -> Result<Image> {
    let mut img = base.to_rgb();
    for (n, mask) in masks.iter().enumerate() {
        let slice = Slice::new(&mask.geometry, axis, index)?;
        if (slice.width, slice.height) != (img.width, img.height) {
            return Err(Error::GeometryMismatch(format!(
                "mask {} slice is {}x{}, image is {}x{}",
                mask.label, slice.width, slice.height, img.width, img.height
            )));
        }
        for (u, v) in contour_pixels(mask, axis, index)? {
            img.set(u, v, PALETTE[n % PALETTE.len()]);
        }
    }
    Ok(img)
}

/// Lines of a regular grid (every `step` voxels) displaced by the in-plane
/// part of the field, drawn on a black canvas magnified `zoom` times.
pub fn render_grid(dvf: &DeformationVectorField, axis: Axis, index: usize, step: usize, zoom: usize) -> Result<Image> {
    let g = &dvf.geometry;
    let slice = Slice::new(g, axis, index)?;
    let step = step.max(1);
    let (zoom, centre) = (zoom.max(1) as f64, (zoom.max(1) / 2) as f64);
    let mut img = Image::gray(slice.width * zoom as usize, slice.height * zoom as usize, 0);
    let at = |u: usize, v: usize| {
        let [i, j, k] = slice.voxel(u, v);
        let (du, dv) = slice.project(g, &dvf.get(i, j, k));
        ((u as f64 + du) * zoom + centre, (v as f64 + dv) * zoom + centre)
    };
    let white = [255; 3];
    for v in (0..slice.height).step_by(step) {
        for u in 1..slice.width {
            img.line(at(u - 1, v), at(u, v), white);
        }
        if slice.width == 1 {
            img.line(at(0, v), at(0, v), white);
        }
    }
    for u in (0..slice.width).step_by(step) {
        for v in 1..slice.height {
            img.line(at(u, v - 1), at(u, v), white);
        }
        if slice.height == 1 {
            img.line(at(u, 0), at(u, 0), white);
        }
    }
    Ok(img)
}

/// Arrows from every `step`-th voxel centre along the in-plane
/// displacement, drawn on a black canvas magnified `zoom` times.
pub fn render_arrows(dvf: &DeformationVectorField, axis: Axis, index: usize, step: usize, zoom: usize) -> Result<Image> {
    let g = &dvf.geometry;
    let slice = Slice::new(g, axis, index)?;
    let step = step.max(1);
    let (zoom, centre) = (zoom.max(1) as f64, (zoom.max(1) / 2) as f64);
    let mut img = Image::gray(slice.width * zoom as usize, slice.height * zoom as usize, 0);
    let shaft = [255; 3];
    let head = [255, 200, 0];
    for v in (step / 2..slice.height).step_by(step) {
        for u in (step / 2..slice.width).step_by(step) {
            let [i, j, k] = slice.voxel(u, v);
            let (du, dv) = slice.project(g, &dvf.get(i, j, k));
            let x0 = u as f64 * zoom + centre;
            let y0 = v as f64 * zoom + centre;
            let (x1, y1) = (x0 + du * zoom, y0 + dv * zoom);
            img.line((x0, y0), (x1, y1), shaft);
            let len = (du * du + dv * dv).sqrt() * zoom;
            if len >= 1.0 {
                let (ex, ey) = ((x1 - x0) / len, (y1 - y0) / len);
                let barb = (0.3 * len).clamp(1.0, 3.0 * zoom);
                for s in [-1.0, 1.0] {
                    let bx = x1 - barb * (ex - s * ey) * std::f64::consts::FRAC_1_SQRT_2;
                    let by = y1 - barb * (ey + s * ex) * std::f64::consts::FRAC_1_SQRT_2;
                    img.line((x1, y1), (bx, by), head);
                }
            }
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::Direction;

    fn geometry() -> Geometry {
        Geometry::new([12, 10, 6], [1.0, 2.0, 1.0], [0.0; 3]).unwrap()
    }

    #[test]
    fn slice_bounds() {
        let g = geometry();
        assert!(Slice::new(&g, Axis::Z, 5).is_ok());
        assert!(matches!(
            Slice::new(&g, Axis::Z, 6),
            Err(Error::SliceOutOfRange { index: 6, len: 6 })
        ));
        let s = Slice::new(&g, Axis::X, 0).unwrap();
        assert_eq!((s.width, s.height), (10, 6));
    }

    #[test]
    fn encode_header() {
        let img = Image::gray(3, 2, 7);
        let bytes = img.encode();
        assert!(bytes.starts_with(b"P5\n3 2\n255\n"));
        assert_eq!(bytes.len(), 11 + 6);
        assert!(Image::rgb(1, 1, [1, 2, 3]).encode().ends_with(&[1, 2, 3]));
    }

    #[test]
    fn zero_field_grid_is_regular() {
        let g = geometry();
        let dvf = DeformationVectorField::zeros(g, Direction::Forward);
        let img = render_grid(&dvf, Axis::Z, 2, 3, 1).unwrap();
        for y in 0..img.height {
            for x in 0..img.width {
                let on = x % 3 == 0 || y % 3 == 0;
                assert_eq!(img.pixel(x, y)[0] == 255, on, "pixel {x},{y}");
            }
        }
    }

    #[test]
    fn translation_arrows_are_identical() {
        let g = Geometry::new([16, 16, 3], [1.0; 3], [0.0; 3]).unwrap();
        let dvf = DeformationVectorField::from_fn(g, Direction::Forward, |_| Vec3::new(1.0, 0.5, 0.0));
        let img = render_arrows(&dvf, Axis::Z, 1, 4, 2).unwrap();
        let patch = |ox: usize, oy: usize| {
            (0..8)
                .flat_map(|y| (0..8).map(move |x| (x, y)))
                .map(|(x, y)| img.pixel(ox + x, oy + y).to_vec())
                .collect::<Vec<_>>()
        };
        let first = patch(0, 0);
        assert!(first.iter().any(|p| p[0] == 255));
        for oy in [0, 8, 16, 24] {
            for ox in [0, 8, 16, 24] {
                assert_eq!(patch(ox, oy), first);
            }
        }
    }

    #[test]
    fn contour_of_box() {
        let g = Geometry::new([8, 8, 1], [1.0; 3], [0.0; 3]).unwrap();
        let m = LabelMask::from_fn(g, "box", |p| (2.0..=5.0).contains(&p.x) && (2.0..=5.0).contains(&p.y));
        let px = contour_pixels(&m, Axis::Z, 0).unwrap();
        assert_eq!(px.len(), 12);
        let vol = Volume::filled(g, 0.5);
        let img = overlay_contours(&render_slice(&vol, Axis::Z, 0).unwrap(), &[&m], Axis::Z, 0).unwrap();
        assert_eq!(img.pixel(2, 2), &PALETTE[0]);
        assert_eq!(img.pixel(3, 3), &[0, 0, 0]);
    }
}
