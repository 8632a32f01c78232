//! Multi-objective deformable registration of 3D volumes.
//!
//! A registration is encoded as two tetrahedral meshes sharing one topology:
//! one embedded in the source image and one in the target image. The point
//! correspondence between the two meshes defines a piecewise-linear,
//! invertible transform in both directions. Solutions are optimized for
//! three conflicting objectives (deformation magnitude, intensity mismatch
//! and guidance-contour mismatch) by a gene-pool optimal mixing evolutionary
//! algorithm that exploits the mesh locality for partial evaluations.
//!
//! Module map:
//!
//! * [`volume`]: scalar volumes, label masks, distance maps, point-set files.
//! * [`mesh`]: dual-mesh genotype, signed volumes, folds, transforms, DVFs.
//! * [`meshgen`]: initial point placement, marching cubes, Delaunay.
//! * [`linkage`]: edge-based FOS elements, interaction graph, coloring.
//! * [`objectives`]: magnitude, intensity and guidance objectives.
//! * [`evolver`]: population, archive, mixing, repair and steering.
//! * [`metrics`]: Dice, Hausdorff, landmark error.
//! * [`synth`]: synthetic problems with analytic ground truth.
//! * [`sobol`]: shifted low-discrepancy sequences for sampling.
//! * [`config`]: `key = value` run configuration.
//! * [`render`]: slice renders as portable pixel maps.

pub mod config;
pub mod error;
pub mod evolver;
pub mod geometry;
pub mod hash;
pub mod linkage;
pub mod mesh;
pub mod meshgen;
pub mod metrics;
pub mod objectives;
pub mod render;
pub mod sobol;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::Vec3;
