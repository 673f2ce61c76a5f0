//! Mini-batch SGD on a device's local loss.

use rand::seq::SliceRandom;
use rand::Rng;

use super::data::Dataset;
use super::model::Architecture;
use crate::error::{Error, Result};

/// A differentiable empirical loss over `len()` samples.
pub trait LocalObjective {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Mean loss over `batch`, writing the mean gradient into `grad`.
    fn loss_grad(&self, params: &[f64], batch: &[usize], grad: &mut [f64]) -> f64;
}

/// Cross-entropy of a model on a dataset.
pub struct Supervised<'a> {
    pub architecture: Architecture,
    pub data: &'a Dataset,
}

impl LocalObjective for Supervised<'_> {
    fn len(&self) -> usize {
        self.data.len()
    }

    fn loss_grad(&self, params: &[f64], batch: &[usize], grad: &mut [f64]) -> f64 {
        self.architecture.loss_grad(params, self.data, batch, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSchedule {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Samples per step; zero means full batch.
    pub batch_size: usize,
}

/// Runs `epochs` passes of shuffled mini-batch SGD from `start` and returns
/// the updated parameters.
pub fn local_update<O: LocalObjective + ?Sized, R: Rng + ?Sized>(
    objective: &O,
    start: &[f64],
    schedule: LocalSchedule,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if objective.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(schedule.learning_rate >= 0.0 && schedule.learning_rate.is_finite()) {
        return Err(Error::invalid("learning_rate", "must be finite and non-negative"));
    }
    let mut params = start.to_vec();
    let n = objective.len();
    let batch = if schedule.batch_size == 0 { n } else { schedule.batch_size.min(n) };
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; params.len()];
    for _ in 0..schedule.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            objective.loss_grad(&params, chunk, &mut grad);
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= schedule.learning_rate * g;
            }
        }
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `(w - 3)^2` repeated over `n` identical samples.
    struct Quadratic(usize);

    impl LocalObjective for Quadratic {
        fn len(&self) -> usize {
            self.0
        }

        fn loss_grad(&self, params: &[f64], _batch: &[usize], grad: &mut [f64]) -> f64 {
            grad[0] = 2.0 * (params[0] - 3.0);
            (params[0] - 3.0).powi(2)
        }
    }

    #[test]
    fn quadratic_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = LocalSchedule {
            epochs: 1,
            learning_rate: 0.1,
            batch_size: 0,
        };
        let w = local_update(&Quadratic(5), &[0.0], s, &mut rng).unwrap();
        assert!((w[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let zero_epochs = LocalSchedule {
            epochs: 0,
            learning_rate: 0.1,
            batch_size: 2,
        };
        assert_eq!(local_update(&Quadratic(5), &[1.5], zero_epochs, &mut rng).unwrap(), vec![1.5]);
        let zero_lr = LocalSchedule {
            epochs: 3,
            learning_rate: 0.0,
            batch_size: 2,
        };
        assert_eq!(local_update(&Quadratic(5), &[1.5], zero_lr, &mut rng).unwrap(), vec![1.5]);
        assert!(matches!(
            local_update(&Quadratic(0), &[1.5], zero_lr, &mut rng),
            Err(Error::EmptyDataset)
        ));
    }
}
