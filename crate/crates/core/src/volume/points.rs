//! Guidance point-set pairs and landmark pairs, with their file formats.
//!
//! Guidance files are JSON:
//!
//! ```json
//! { "pairs": [ { "label": "bladder",
//!                "source_points": [[x, y, z], ...],
//!                "target_points": [[x, y, z], ...] } ] }
//! ```
//!
//! Landmark files hold one `sx,sy,sz,tx,ty,tz` line per pair (mm). Blank
//! lines and lines starting with `#` are skipped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Geometry;
use crate::geometry::{to_array, vec3, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GuidancePair {
    pub label: String,
    pub source_points: Vec<Vec3>,
    pub target_points: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GuidanceSet {
    pub pairs: Vec<GuidancePair>,
}

impl GuidanceSet {
    pub fn new(pairs: Vec<GuidancePair>) -> Result<Self> {
        for p in &pairs {
            if p.source_points.is_empty() || p.target_points.is_empty() {
                return Err(Error::Empty(format!("guidance pair {:?} has an empty side", p.label)));
            }
        }
        Ok(Self { pairs })
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// |G_s|: total number of source-side guidance points.
    pub fn total_source(&self) -> usize {
        self.pairs.iter().map(|p| p.source_points.len()).sum()
    }

    /// |G_t|: total number of target-side guidance points.
    pub fn total_target(&self) -> usize {
        self.pairs.iter().map(|p| p.target_points.len()).sum()
    }

    pub fn pair(&self, label: &str) -> Option<&GuidancePair> {
        self.pairs.iter().find(|p| p.label == label)
    }
}

#[derive(Serialize, Deserialize)]
struct PairFile {
    label: String,
    source_points: Vec<[f64; 3]>,
    target_points: Vec<[f64; 3]>,
}

#[derive(Serialize, Deserialize)]
struct GuidanceFile {
    pairs: Vec<PairFile>,
}

pub fn load_guidance(path: impl AsRef<Path>) -> Result<GuidanceSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: GuidanceFile =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let conv = |v: Vec<[f64; 3]>| -> Result<Vec<Vec3>> {
        v.into_iter()
            .map(|a| {
                if a.iter().all(|c| c.is_finite()) {
                    Ok(vec3(a))
                } else {
                    Err(Error::format(path, "non-finite guidance coordinate"))
                }
            })
            .collect()
    };
    let mut pairs = Vec::with_capacity(file.pairs.len());
    for p in file.pairs {
        pairs.push(GuidancePair {
            label: p.label,
            source_points: conv(p.source_points)?,
            target_points: conv(p.target_points)?,
        });
    }
    GuidanceSet::new(pairs)
}

pub fn save_guidance(path: impl AsRef<Path>, g: &GuidanceSet) -> Result<()> {
    let path = path.as_ref();
    let file = GuidanceFile {
        pairs: g
            .pairs
            .iter()
            .map(|p| PairFile {
                label: p.label.clone(),
                source_points: p.source_points.iter().map(to_array).collect(),
                target_points: p.target_points.iter().map(to_array).collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string(&file).expect("guidance serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkPair {
    pub source: Vec3,
    pub target: Vec3,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LandmarkPairs {
    pub pairs: Vec<LandmarkPair>,
}

impl LandmarkPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Checks that every landmark lies inside the physical image bounds.
    pub fn validate_within(&self, geometry: &Geometry) -> Result<()> {
        let b = geometry.physical_bounds();
        for (i, p) in self.pairs.iter().enumerate() {
            for q in [&p.source, &p.target] {
                if !q.iter().all(|c| c.is_finite()) || !b.contains(q) {
                    return Err(Error::InvalidParameter(format!("landmark {i} outside the volume")));
                }
            }
        }
        Ok(())
    }
}

pub fn load_landmarks(path: impl AsRef<Path>) -> Result<LandmarkPairs> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        if vals.len() != 6 || vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::format(path, format!("line {}: expected 6 finite values", n + 1)));
        }
        pairs.push(LandmarkPair {
            source: Vec3::new(vals[0], vals[1], vals[2]),
            target: Vec3::new(vals[3], vals[4], vals[5]),
        });
    }
    Ok(LandmarkPairs { pairs })
}

pub fn save_landmarks(path: impl AsRef<Path>, l: &LandmarkPairs) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for p in &l.pairs {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.source.x, p.source.y, p.source.z, p.target.x, p.target.y, p.target.z
        );
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
