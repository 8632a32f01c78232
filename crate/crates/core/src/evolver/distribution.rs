//! Per-cluster Gaussian models of the twelve variables of one FOS element.

use nalgebra::{SMatrix, SVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::Vec3;
use crate::linkage::ELEMENT_VARIABLES;
use crate::mesh::{DualMeshGenotype, Side};

pub type ElementVector = SVector<f64, ELEMENT_VARIABLES>;
pub type ElementMatrix = SMatrix<f64, ELEMENT_VARIABLES, ELEMENT_VARIABLES>;

/// The element's variables in the order `[a.src, b.src, a.tgt, b.tgt]`.
pub fn element_variables(g: &DualMeshGenotype, points: [usize; 2]) -> ElementVector {
    let mut v = ElementVector::zeros();
    for (s, side) in Side::BOTH.into_iter().enumerate() {
        let c = g.coords(side);
        for (j, &p) in points.iter().enumerate() {
            for a in 0..3 {
                v[s * 6 + j * 3 + a] = c[p][a];
            }
        }
    }
    v
}

/// Splits a twelve-vector into `[[a.src, b.src], [a.tgt, b.tgt]]`.
pub fn split_variables(v: &ElementVector) -> [[Vec3; 2]; 2] {
    [0, 1].map(|s| [0, 1].map(|j| Vec3::new(v[s * 6 + j * 3], v[s * 6 + j * 3 + 1], v[s * 6 + j * 3 + 2])))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: ElementVector,
    pub covariance: ElementMatrix,
    /// Lower Cholesky factor of the covariance.
    pub factor: ElementMatrix,
}

impl Gaussian {
    /// Sample mean and unbiased covariance, regularized by
    /// `(1e-10 · trace / 12 + 1e-12) · I`.
    pub fn estimate(samples: &[ElementVector]) -> Self {
        let n = samples.len().max(1) as f64;
        let mean = samples.iter().fold(ElementVector::zeros(), |acc, x| acc + x) / n;
        let mut cov = ElementMatrix::zeros();
        if samples.len() > 1 {
            for x in samples {
                let d = x - mean;
                cov += d * d.transpose();
            }
            cov /= n - 1.0;
        }
        let eps = 1e-10 * cov.trace() / ELEMENT_VARIABLES as f64 + 1e-12;
        cov += ElementMatrix::identity() * eps;
        let factor = match cov.cholesky() {
            Some(c) => c.l(),
            None => ElementMatrix::from_diagonal(&cov.diagonal().map(|x| x.max(0.0).sqrt())),
        };
        Self {
            mean,
            covariance: cov,
            factor,
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> ElementVector {
        let z = ElementVector::from_fn(|_, _| rng.sample(StandardNormal));
        self.mean + self.factor * z
    }
}
