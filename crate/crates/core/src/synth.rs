//! Synthetic registration problems with an analytic ground-truth
//! deformation: a shrinking ball inside a body, next to a rigid box and a
//! soft ellipsoid.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{vec3, Vec3};
use crate::hash::{mix64, stream_seed};
use crate::mesh::{DeformationVectorField, Direction};
use crate::metrics::{percentile, surface_points_from_mask, FieldError, DEFAULT_MARGIN_MM};
use crate::volume::{
    load_guidance, load_label_mask, load_landmarks, load_volume, save_guidance, save_label_mask, save_landmarks,
    save_volume, Geometry, GuidancePair, GuidanceSet, LabelMask, LandmarkPair, LandmarkPairs, Volume,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Ball { center: [f64; 3], radius: f64 },
    Ellipsoid { center: [f64; 3], radii: [f64; 3] },
    Box { min: [f64; 3], max: [f64; 3] },
}

impl Shape {
    pub fn contains(&self, p: &Vec3) -> bool {
        match *self {
            Shape::Ball { center, radius } => (p - vec3(center)).norm_squared() <= radius * radius,
            Shape::Ellipsoid { center, radii } => {
                (0..3).map(|a| ((p[a] - center[a]) / radii[a]).powi(2)).sum::<f64>() <= 1.0
            }
            Shape::Box { min, max } => (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]),
        }
    }

    /// Lower and upper corners of the bounding box.
    pub fn extent(&self) -> ([f64; 3], [f64; 3]) {
        match *self {
            Shape::Ball { center, radius } => (center.map(|c| c - radius), center.map(|c| c + radius)),
            Shape::Ellipsoid { center, radii } => ([0, 1, 2].map(|a| center[a] - radii[a]), [0, 1, 2].map(|a| center[a] + radii[a])),
            Shape::Box { min, max } => (min, max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthObject {
    pub label: String,
    pub shape: Shape,
    pub intensity: f32,
    /// Stiffness factor for the magnitude objective, if not default.
    #[serde(default)]
    pub elasticity: Option<f64>,
    /// Whether surface points of this object enter the guidance set.
    #[serde(default)]
    pub guidance: bool,
}

/// Radial shrink about `center`: the sphere of radius `r0` maps to `r1`,
/// scaling linearly inside and blending back to identity at `falloff`
/// with a cubic Hermite segment (C¹ at both ends).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialField {
    pub center: [f64; 3],
    pub r0: f64,
    pub r1: f64,
    pub falloff: f64,
}

impl RadialField {
    pub fn validate(&self) -> Result<()> {
        if !(self.r1 > 0.0 && self.r1 < self.r0 && self.falloff > self.r0) {
            return Err(Error::InvalidParameter(format!("radial field {self:?}")));
        }
        Ok(())
    }

    /// Mapped radius of a source point at radius `r`.
    pub fn rho(&self, r: f64) -> f64 {
        if r <= self.r0 {
            return r * self.r1 / self.r0;
        }
        if r >= self.falloff {
            return r;
        }
        let h = self.falloff - self.r0;
        let t = (r - self.r0) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.r1
            + (t3 - 2.0 * t2 + t) * h * (self.r1 / self.r0)
            + (-2.0 * t3 + 3.0 * t2) * self.falloff
            + (t3 - t2) * h
    }

    /// Source radius mapping to `y` (bisection on the monotone blend).
    pub fn rho_inv(&self, y: f64) -> f64 {
        if y <= self.r1 {
            return y * self.r0 / self.r1;
        }
        if y >= self.falloff {
            return y;
        }
        let (mut lo, mut hi) = (self.r0, self.falloff);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.rho(mid) < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    fn radial(&self, x: &Vec3, f: impl Fn(f64) -> f64) -> Vec3 {
        let d = x - vec3(self.center);
        let r = d.norm();
        if r == 0.0 {
            return Vec3::zeros();
        }
        d * ((f(r) - r) / r)
    }

    /// Forward displacement: source point `x` moves to `x + forward(x)`.
    pub fn forward(&self, x: &Vec3) -> Vec3 {
        self.radial(x, |r| self.rho(r))
    }

    /// Inverse displacement: target point `y` comes from `y + inverse(y)`.
    pub fn inverse(&self, y: &Vec3) -> Vec3 {
        self.radial(y, |r| self.rho_inv(r))
    }

    pub fn dvf(&self, geometry: Geometry, direction: Direction) -> DeformationVectorField {
        DeformationVectorField::from_fn(geometry, direction, |p| match direction {
            Direction::Forward => self.forward(&p),
            Direction::Inverse => self.inverse(&p),
        })
    }

    /// Smallest central-difference Jacobian determinant of the forward map
    /// over the voxel centres.
    pub fn min_jacobian(&self, geometry: &Geometry) -> f64 {
        let h = 1e-3 * geometry.spacing_mm[0];
        let map = |p: Vec3| p + self.forward(&p);
        (0..geometry.len())
            .map(|idx| {
                let [i, j, k] = geometry.unravel(idx);
                let p = geometry.world(i, j, k);
                let cols: Vec<Vec3> = (0..3)
                    .map(|a| {
                        let mut e = Vec3::zeros();
                        e[a] = h;
                        (map(p + e) - map(p - e)) / (2.0 * h)
                    })
                    .collect();
                nalgebra::Matrix3::from_columns(&cols).determinant()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub dims: [usize; 3],
    pub spacing_mm: f64,
    /// Painted in order; later objects cover earlier ones.
    pub objects: Vec<SynthObject>,
    pub field: RadialField,
    /// Fraction of surface voxels kept as guidance points.
    pub guidance_density: f64,
    pub landmark_count: usize,
    /// Landmarks are drawn where the displacement is at most this fraction
    /// of `r0 - r1`.
    pub landmark_max_displacement: f64,
    /// Sub-samples per axis when painting intensities.
    pub supersampling: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self::preset(64, 1.5)
    }
}

impl SynthSpec {
    /// The default anatomy on an `n³` grid; physical sizes are those of the
    /// 64³ grid at 1.5 mm, so `preset(32, 3.0)` is the same scene coarser.
    pub fn preset(n: usize, spacing_mm: f64) -> Self {
        let v = 1.5;
        let objects = vec![
            SynthObject {
                label: "body".into(),
                shape: Shape::Ellipsoid {
                    center: [0.0; 3],
                    radii: [31.0 * v, 31.5 * v, 31.0 * v],
                },
                intensity: 0.3,
                elasticity: None,
                guidance: false,
            },
            SynthObject {
                label: "bowel".into(),
                shape: Shape::Ellipsoid {
                    center: [-21.0 * v, -9.0 * v, 3.0 * v],
                    radii: [5.5 * v, 5.0 * v, 8.0 * v],
                },
                intensity: 0.45,
                elasticity: None,
                guidance: true,
            },
            SynthObject {
                label: "bladder".into(),
                shape: Shape::Ball {
                    center: [0.0, 7.0 * v, 0.0],
                    radius: 20.0 * v,
                },
                intensity: 0.6,
                elasticity: Some(0.5),
                guidance: true,
            },
            SynthObject {
                label: "bone".into(),
                shape: Shape::Box {
                    min: [-16.0 * v, -30.5 * v, -8.0 * v],
                    max: [16.0 * v, -22.0 * v, 8.0 * v],
                },
                intensity: 1.0,
                elasticity: Some(10.0),
                guidance: true,
            },
        ];
        Self {
            dims: [n; 3],
            spacing_mm,
            objects,
            field: RadialField {
                center: [0.0, 7.0 * v, 0.0],
                r0: 20.0 * v,
                r1: 14.0 * v,
                falloff: 28.0 * v,
            },
            guidance_density: 1.0,
            landmark_count: 12,
            landmark_max_displacement: 0.25,
            supersampling: 2,
            seed: 0,
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        let origin = [0, 1, 2].map(|a| -0.5 * (self.dims[a] as f64 - 1.0) * self.spacing_mm);
        Geometry::new(self.dims, [self.spacing_mm; 3], origin)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.geometry()?;
        self.field.validate()?;
        if !(self.guidance_density > 0.0 && self.guidance_density <= 1.0) || self.supersampling == 0 {
            return Err(Error::InvalidParameter("guidance density or supersampling".into()));
        }
        let b = g.physical_bounds();
        for o in &self.objects {
            let (lo, hi) = o.shape.extent();
            if (0..3).any(|a| lo[a] < b.min[a] || hi[a] > b.max[a]) {
                return Err(Error::InvalidParameter(format!("object {:?} leaves the image", o.label)));
            }
            if !(0.0..=1.0).contains(&o.intensity) {
                return Err(Error::InvalidParameter(format!("intensity of {:?}", o.label)));
            }
        }
        Ok(())
    }

    /// Label/elasticity pairs for the magnitude objective.
    pub fn elasticity(&self) -> Vec<(String, f64)> {
        self.objects
            .iter()
            .filter_map(|o| o.elasticity.map(|e| (o.label.clone(), e)))
            .collect()
    }

    fn intensity_at(&self, p: &Vec3) -> f32 {
        self.objects
            .iter()
            .rev()
            .find(|o| o.shape.contains(p))
            .map_or(0.0, |o| o.intensity)
    }
}

/// Everything a registration run consumes; `spec` is present for synthetic
/// cases and carries the analytic field.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemBundle {
    pub source: Volume,
    pub target: Volume,
    pub source_masks: Vec<LabelMask>,
    pub target_masks: Vec<LabelMask>,
    pub guidance: GuidanceSet,
    pub landmarks: LandmarkPairs,
    pub spec: Option<SynthSpec>,
}

impl ProblemBundle {
    pub fn target_mask(&self, label: &str) -> Option<&LabelMask> {
        self.target_masks.iter().find(|m| m.label == label)
    }

    pub fn source_mask(&self, label: &str) -> Option<&LabelMask> {
        self.source_masks.iter().find(|m| m.label == label)
    }

    pub fn field(&self) -> Option<&RadialField> {
        self.spec.as_ref().map(|s| &s.field)
    }
}

fn paint(spec: &SynthSpec, g: &Geometry, map: impl Fn(&Vec3) -> Vec3) -> Volume {
    let s = spec.supersampling;
    let offs: Vec<f64> = (0..s).map(|i| ((i as f64 + 0.5) / s as f64 - 0.5) * spec.spacing_mm).collect();
    let norm = (s * s * s) as f32;
    Volume::from_fn(*g, |c| {
        let mut acc = 0.0f32;
        for &dz in &offs {
            for &dy in &offs {
                for &dx in &offs {
                    acc += spec.intensity_at(&map(&(c + Vec3::new(dx, dy, dz))));
                }
            }
        }
        acc / norm
    })
}

fn thin(points: Vec<Vec3>, density: f64, key: u64) -> Vec<Vec3> {
    if density >= 1.0 {
        return points;
    }
    let kept: Vec<Vec3> = points
        .iter()
        .enumerate()
        .filter(|(i, _)| (mix64(key ^ mix64(*i as u64)) >> 11) as f64 / (1u64 << 53) as f64 <= density)
        .map(|(_, p)| *p)
        .collect();
    if kept.is_empty() {
        points[..1].to_vec()
    } else {
        kept
    }
}

pub fn generate_case(spec: &SynthSpec) -> Result<ProblemBundle> {
    spec.validate()?;
    let g = spec.geometry()?;
    let field = spec.field;
    let source = paint(spec, &g, |p| *p);
    let target = paint(spec, &g, |p| p + field.inverse(p));

    let mut source_masks = Vec::new();
    let mut target_masks = Vec::new();
    for o in &spec.objects {
        source_masks.push(LabelMask::from_fn(g, o.label.clone(), |p| o.shape.contains(&p)));
        target_masks.push(LabelMask::from_fn(g, o.label.clone(), |p| o.shape.contains(&(p + field.inverse(&p)))));
    }

    let mut pairs = Vec::new();
    for (i, o) in spec.objects.iter().enumerate().filter(|(_, o)| o.guidance) {
        let key = mix64(spec.seed ^ mix64(i as u64));
        pairs.push(GuidancePair {
            label: o.label.clone(),
            source_points: thin(surface_points_from_mask(&source_masks[i])?, spec.guidance_density, key),
            target_points: thin(surface_points_from_mask(&target_masks[i])?, spec.guidance_density, key ^ 1),
        });
    }
    let guidance = GuidanceSet::new(pairs)?;

    let mut rng = ChaCha8Rng::from_seed(stream_seed(&[spec.seed, 0x1a4d]));
    let inner = g.cropped(g.margin_voxels(DEFAULT_MARGIN_MM)?).center_bounds();
    let body = spec.objects.first();
    let limit = spec.landmark_max_displacement * (field.r0 - field.r1);
    let mut landmarks = LandmarkPairs::default();
    let mut tries = 0;
    while landmarks.len() < spec.landmark_count && tries < 100_000 {
        tries += 1;
        let s = inner.min + inner.size().component_mul(&Vec3::new(rng.random(), rng.random(), rng.random()));
        let u = field.forward(&s);
        if u.norm() > limit || body.is_some_and(|b| !b.shape.contains(&s)) {
            continue;
        }
        landmarks.pairs.push(LandmarkPair { source: s, target: s + u });
    }
    if landmarks.len() < spec.landmark_count {
        return Err(Error::InvalidParameter("could not place the requested landmarks".into()));
    }

    Ok(ProblemBundle {
        source,
        target,
        source_masks,
        target_masks,
        guidance,
        landmarks,
        spec: Some(spec.clone()),
    })
}

/// Mean and 95th-percentile distance between a field and the analytic one
/// over covered voxels inside the cropped interior.
pub fn analytic_dvf_error(dvf: &DeformationVectorField, field: &RadialField, margin_mm: f64) -> Result<FieldError> {
    let g = dvf.geometry;
    let m = g.margin_voxels(margin_mm)?;
    let mut errs = Vec::new();
    for idx in 0..g.len() {
        let [i, j, k] = g.unravel(idx);
        if !dvf.is_covered(idx) || (0..3).any(|a| [i, j, k][a] < m[a] || [i, j, k][a] >= g.dims[a] - m[a]) {
            continue;
        }
        let p = g.world(i, j, k);
        let truth = match dvf.direction {
            Direction::Forward => field.forward(&p),
            Direction::Inverse => field.inverse(&p),
        };
        errs.push((dvf.displacement[idx] - truth).norm());
    }
    if errs.is_empty() {
        return Err(Error::Empty("no covered voxels inside the margin".into()));
    }
    let mean = errs.iter().sum::<f64>() / errs.len() as f64;
    let n = errs.len();
    Ok(FieldError {
        mean_mm: mean,
        p95_mm: percentile(&mut errs, 95.0),
        voxels: n,
    })
}

fn mask_name(side: &str, label: &str) -> String {
    format!("masks/{side}_{label}")
}

/// Writes a problem directory: volumes, masks, guidance, landmarks, the
/// spec and (for synthetic cases) the analytic fields.
pub fn write_bundle(dir: impl AsRef<Path>, b: &ProblemBundle) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("masks")).map_err(|e| Error::io(dir, e))?;
    save_volume(dir.join("source"), &b.source)?;
    save_volume(dir.join("target"), &b.target)?;
    for m in &b.source_masks {
        save_label_mask(dir.join(mask_name("source", &m.label)), m)?;
    }
    for m in &b.target_masks {
        save_label_mask(dir.join(mask_name("target", &m.label)), m)?;
    }
    save_guidance(dir.join("guidance.json"), &b.guidance)?;
    save_landmarks(dir.join("landmarks.csv"), &b.landmarks)?;
    if let Some(spec) = &b.spec {
        let text = serde_json::to_string_pretty(spec).expect("spec serializes") + "\n";
        let p = dir.join("spec.json");
        fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        let g = b.source.geometry;
        for d in [Direction::Forward, Direction::Inverse] {
            crate::mesh::save_dvf(dir.join(format!("field_{}", d.as_str())), &spec.field.dvf(g, d))?;
        }
    }
    Ok(())
}

fn mask_labels(dir: &Path, side: &str) -> Result<Vec<String>> {
    let masks = dir.join("masks");
    let prefix = format!("{side}_");
    let mut labels = Vec::new();
    for entry in fs::read_dir(&masks).map_err(|e| Error::io(&masks, e))? {
        let name = entry.map_err(|e| Error::io(&masks, e))?.file_name().to_string_lossy().into_owned();
        if let Some(l) = name.strip_prefix(&prefix).and_then(|n| n.strip_suffix(".vol.json")) {
            labels.push(l.to_string());
        }
    }
    labels.sort();
    Ok(labels)
}

/// Reads a problem directory. Masks are ordered as in the spec when one is
/// present, otherwise by label.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<ProblemBundle> {
    let dir = dir.as_ref();
    let spec_path = dir.join("spec.json");
    let spec: Option<SynthSpec> = if spec_path.exists() {
        let text = fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
        Some(serde_json::from_str(&text).map_err(|e| Error::format(&spec_path, e.to_string()))?)
    } else {
        None
    };
    let labels = match &spec {
        Some(s) => s.objects.iter().map(|o| o.label.clone()).collect(),
        None => mask_labels(dir, "source")?,
    };
    let load = |side: &str| -> Result<Vec<LabelMask>> {
        labels
            .iter()
            .map(|l| load_label_mask(dir.join(mask_name(side, l))))
            .collect()
    };
    let landmarks_path = dir.join("landmarks.csv");
    Ok(ProblemBundle {
        source: load_volume(dir.join("source"))?,
        target: load_volume(dir.join("target"))?,
        source_masks: load("source")?,
        target_masks: load("target")?,
        guidance: load_guidance(dir.join("guidance.json"))?,
        landmarks: if landmarks_path.exists() {
            load_landmarks(&landmarks_path)?
        } else {
            LandmarkPairs::default()
        },
        spec,
    })
}
