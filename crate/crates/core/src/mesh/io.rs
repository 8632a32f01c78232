//! Genotype export as JSON: topology plus both coordinate arrays in mm.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{DualMeshGenotype, TetTopology};
use crate::geometry::{to_array, vec3};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct GenotypeFile {
    num_points: usize,
    tets: Vec<[u32; 4]>,
    source: Vec<[f64; 3]>,
    target: Vec<[f64; 3]>,
}

pub(crate) fn genotype_to_json(g: &DualMeshGenotype) -> serde_json::Value {
    let f = GenotypeFile {
        num_points: g.num_points(),
        tets: g.topology.tets().to_vec(),
        source: g.source.iter().map(to_array).collect(),
        target: g.target.iter().map(to_array).collect(),
    };
    serde_json::to_value(f).expect("genotype serializes")
}

pub fn save_genotype(path: impl AsRef<Path>, g: &DualMeshGenotype) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(&genotype_to_json(g)).expect("genotype serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_genotype(path: impl AsRef<Path>) -> Result<DualMeshGenotype> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: GenotypeFile = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let topo = TetTopology::new(f.num_points, f.tets).map_err(|e| Error::format(path, e.to_string()))?;
    DualMeshGenotype::new(
        Arc::new(topo),
        f.source.into_iter().map(vec3).collect(),
        f.target.into_iter().map(vec3).collect(),
    )
    .map_err(|e| Error::format(path, e.to_string()))
}
