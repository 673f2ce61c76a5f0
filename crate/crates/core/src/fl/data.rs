//! Labelled feature matrices and the uniform split across devices.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Row-major samples with integer labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<f64>,
    pub labels: Vec<u8>,
    pub dim: usize,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<u8>, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dim", "must be positive"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::DimensionMismatch {
                what: "features",
                got: features.len(),
                expected: labels.len() * dim,
            });
        }
        if let Some(&label) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Dataset {
            features,
            labels,
            dim,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.sample(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
            classes: self.classes,
        }
    }

    /// Shuffles once and deals near-equal contiguous shares to `parts` devices.
    pub fn split_uniform(&self, parts: usize, seed: u64) -> Result<Vec<Dataset>> {
        if parts == 0 {
            return Err(Error::invalid("parts", "must be positive"));
        }
        if self.len() < parts {
            return Err(Error::EmptyDataset);
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let (base, extra) = (self.len() / parts, self.len() % parts);
        let mut start = 0;
        Ok((0..parts)
            .map(|p| {
                let size = base + usize::from(p < extra);
                let shard = self.subset(&order[start..start + size]);
                start += size;
                shard
            })
            .collect())
    }
}

/// Isotropic Gaussian classes around random centres `separation * N(0, I)`.
///
/// Train and test sets share the centres; samples come from separate streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBlobs {
    pub dim: usize,
    pub classes: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for GaussianBlobs {
    fn default() -> Self {
        GaussianBlobs {
            dim: 64,
            classes: 10,
            separation: 0.45,
            seed: 0,
        }
    }
}

impl GaussianBlobs {
    fn centres(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.classes * self.dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                self.separation * z
            })
            .collect()
    }

    /// `count` samples with balanced labels from sample stream `stream`.
    pub fn generate(&self, count: usize, stream: u64) -> Result<Dataset> {
        if self.classes == 0 || self.classes > 256 {
            return Err(Error::invalid("classes", "must lie in 1..=256"));
        }
        let centres = self.centres();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream + 1);
        let mut features = Vec::with_capacity(count * self.dim);
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let c = i % self.classes;
            labels.push(c as u8);
            for j in 0..self.dim {
                let noise: f64 = StandardNormal.sample(&mut rng);
                features.push(centres[c * self.dim + j] + noise);
            }
        }
        Dataset::new(features, labels, self.dim, self.classes)
    }

    pub fn train_test(&self, train: usize, test: usize) -> Result<(Dataset, Dataset)> {
        Ok((self.generate(train, 0)?, self.generate(test, 1)?))
    }
}
