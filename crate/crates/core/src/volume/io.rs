//! `<name>.vol.json` header plus `<name>.vol.raw` little-endian payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Geometry, LabelMask, Volume};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dtype {
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "u8")]
    U8,
    #[serde(rename = "i16")]
    I16,
    #[serde(rename = "f32x3")]
    F32x3,
}

impl Dtype {
    pub fn bytes_per_voxel(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U8 => 1,
            Dtype::I16 => 2,
            Dtype::F32x3 => 12,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolumeHeader {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dtype: Dtype,
    pub order: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
}

impl VolumeHeader {
    pub fn new(geometry: &Geometry, dtype: Dtype) -> Self {
        Self {
            dims: geometry.dims,
            spacing_mm: geometry.spacing_mm,
            origin_mm: geometry.origin_mm,
            dtype,
            order: "x-fastest".into(),
            label: None,
            direction: None,
        }
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.dims, self.spacing_mm, self.origin_mm)
    }
}

fn stem(path: &Path) -> PathBuf {
    let s = path.to_string_lossy();
    for suffix in [".vol.json", ".vol.raw"] {
        if let Some(base) = s.strip_suffix(suffix) {
            return PathBuf::from(base);
        }
    }
    path.to_path_buf()
}

/// Header path for a base name or either file of the pair.
pub fn header_path(path: impl AsRef<Path>) -> PathBuf {
    let mut s = stem(path.as_ref()).into_os_string();
    s.push(".vol.json");
    s.into()
}

pub fn raw_path(path: impl AsRef<Path>) -> PathBuf {
    let mut s = stem(path.as_ref()).into_os_string();
    s.push(".vol.raw");
    s.into()
}

pub(crate) fn read_pair(path: &Path) -> Result<(VolumeHeader, Geometry, Vec<u8>)> {
    let hp = header_path(path);
    let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
    let header: VolumeHeader =
        serde_json::from_str(&text).map_err(|e| Error::format(&hp, e.to_string()))?;
    if header.order != "x-fastest" {
        return Err(Error::format(&hp, format!("unsupported order {:?}", header.order)));
    }
    let geometry = header.geometry()?;
    let rp = raw_path(path);
    let raw = fs::read(&rp).map_err(|e| Error::io(&rp, e))?;
    let expected = geometry.len() * header.dtype.bytes_per_voxel();
    if raw.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: raw.len(),
        });
    }
    Ok((header, geometry, raw))
}

pub(crate) fn write_pair(path: &Path, header: &VolumeHeader, raw: &[u8]) -> Result<()> {
    let hp = header_path(path);
    if let Some(dir) = hp.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(header).expect("header serializes");
    fs::write(&hp, text + "\n").map_err(|e| Error::io(&hp, e))?;
    let rp = raw_path(path);
    fs::write(&rp, raw).map_err(|e| Error::io(&rp, e))
}

fn decode_scalars(dtype: Dtype, raw: &[u8], path: &Path) -> Result<Vec<f32>> {
    Ok(match dtype {
        Dtype::F32 => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        Dtype::U8 => raw.iter().map(|&b| f32::from(b)).collect(),
        Dtype::I16 => raw
            .chunks_exact(2)
            .map(|c| f32::from(i16::from_le_bytes([c[0], c[1]])))
            .collect(),
        Dtype::F32x3 => {
            return Err(Error::format(path, "vector payload where a scalar volume was expected"))
        }
    })
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let (header, geometry, raw) = read_pair(path)?;
    let data = decode_scalars(header.dtype, &raw, path)?;
    Volume::new(geometry, data)
}

pub fn save_volume(path: impl AsRef<Path>, v: &Volume) -> Result<()> {
    let header = VolumeHeader::new(&v.geometry, Dtype::F32);
    let mut raw = Vec::with_capacity(v.data.len() * 4);
    for x in &v.data {
        raw.extend_from_slice(&x.to_le_bytes());
    }
    write_pair(path.as_ref(), &header, &raw)
}

pub fn load_label_mask(path: impl AsRef<Path>) -> Result<LabelMask> {
    let path = path.as_ref();
    let (header, geometry, raw) = read_pair(path)?;
    let data: Vec<u8> = match header.dtype {
        Dtype::U8 => raw,
        other => decode_scalars(other, &raw, path)?
            .into_iter()
            .map(|v| u8::from(v != 0.0))
            .collect(),
    };
    let label = header.label.clone().unwrap_or_else(|| {
        stem(path)
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    LabelMask::new(geometry, data, label)
}

pub fn save_label_mask(path: impl AsRef<Path>, m: &LabelMask) -> Result<()> {
    let mut header = VolumeHeader::new(&m.geometry, Dtype::U8);
    header.label = Some(m.label.clone());
    write_pair(path.as_ref(), &header, &m.data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decodes_header_and_payload() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("a");
        let header = r#"{"dims":[2,2,2],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f32","order":"x-fastest"}"#;
        fs::write(header_path(&base), header).unwrap();
        let vals: Vec<f32> = (0..8).map(|i| i as f32 * 0.5).collect();
        let raw: Vec<u8> = vals.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(raw_path(&base), &raw).unwrap();
        let v = load_volume(header_path(&base)).unwrap();
        assert_eq!(v.data, vals);
        assert_eq!(v.geometry.dims, [2, 2, 2]);
    }

    #[test]
    fn short_payload_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("b");
        let header = r#"{"dims":[2,2,2],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"f32","order":"x-fastest"}"#;
        fs::write(header_path(&base), header).unwrap();
        fs::write(raw_path(&base), vec![0u8; 28]).unwrap();
        assert!(matches!(
            load_volume(&base),
            Err(Error::LengthMismatch { expected: 32, found: 28 })
        ));
    }

    #[test]
    fn missing_file_and_bad_spacing() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_volume(dir.path().join("nope")), Err(Error::Io { .. })));
        let base = dir.path().join("c");
        let header = r#"{"dims":[1,1,1],"spacing_mm":[1,0,1],"origin_mm":[0,0,0],"dtype":"u8","order":"x-fastest"}"#;
        fs::write(header_path(&base), header).unwrap();
        fs::write(raw_path(&base), [1u8]).unwrap();
        assert!(matches!(load_volume(&base), Err(Error::Geometry(_))));
    }

    #[test]
    fn i16_payload_converts() {
        let dir = tempfile::tempdir().unwrap();
        let base = dir.path().join("d");
        let header = r#"{"dims":[2,1,1],"spacing_mm":[1,1,1],"origin_mm":[0,0,0],"dtype":"i16","order":"x-fastest"}"#;
        fs::write(header_path(&base), header).unwrap();
        let raw: Vec<u8> = [-1000i16, 250].iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(raw_path(&base), raw).unwrap();
        assert_eq!(load_volume(&base).unwrap().data, vec![-1000.0, 250.0]);
    }

    #[test]
    fn mask_round_trip_keeps_label() {
        let dir = tempfile::tempdir().unwrap();
        let g = Geometry::new([3, 2, 1], [1.0, 2.0, 3.0], [0.5, 0.0, -1.0]).unwrap();
        let m = LabelMask::new(g, vec![0, 1, 1, 0, 1, 0], "bladder").unwrap();
        save_label_mask(dir.path().join("m"), &m).unwrap();
        assert_eq!(load_label_mask(dir.path().join("m.vol.json")).unwrap(), m);
    }
}
