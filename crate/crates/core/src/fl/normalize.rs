//! Standardisation of parameter vectors before analog transmission.
//!
//! Each device reports `(mean, std)` of its vector over an error-free control
//! link. All scheduled devices then standardise against one pooled reference,
//! so the superposed stream can be mapped back to the weighted average exactly.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Smallest standard deviation used as a divisor.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub mean: f64,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: f64,
}

impl NormalizationStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Ok(NormalizationStats {
            mean,
            std: var.sqrt().max(STD_FLOOR),
        })
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|v| (v - self.mean) / self.std).collect()
    }
}

/// Zero-mean, unit-variance copy of `values` and the statistics used.
pub fn normalize(values: &[f64]) -> Result<(Vec<f64>, NormalizationStats)> {
    let stats = NormalizationStats::of(values)?;
    Ok((stats.apply(values), stats))
}

/// Mean and spread of the weighted mixture of the scheduled devices' entries.
pub fn pooled_reference(stats: &[NormalizationStats], weights: &[f64], schedule: &[bool]) -> Result<NormalizationStats> {
    check_len("weights", weights.len(), stats.len())?;
    check_len("schedule", schedule.len(), stats.len())?;
    let picked = || (0..stats.len()).filter(|&k| schedule[k]);
    let total: f64 = picked().map(|k| weights[k]).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let mean = picked().map(|k| weights[k] * stats[k].mean).sum::<f64>() / total;
    let var = picked()
        .map(|k| weights[k] * (stats[k].std.powi(2) + (stats[k].mean - mean).powi(2)))
        .sum::<f64>()
        / total;
    Ok(NormalizationStats {
        mean,
        std: var.sqrt().max(STD_FLOOR),
    })
}

/// Maps an estimate of `sum_{k in S} phi_k x_k` (standardised domain) back to
/// the renormalised average `sum_{k in S} phi_k s_k / sum_{k in S} phi_k`.
pub fn denormalize(aggregate: &[f64], stats: &[NormalizationStats], weights: &[f64], schedule: &[bool]) -> Result<Vec<f64>> {
    let reference = pooled_reference(stats, weights, schedule)?;
    let total: f64 = (0..stats.len()).filter(|&k| schedule[k]).map(|k| weights[k]).sum();
    Ok(aggregate
        .iter()
        .map(|a| (reference.std * a + reference.mean * total) / total)
        .collect())
}

/// Weights restricted to the schedule and rescaled to sum to one.
pub fn renormalized_weights(weights: &[f64], schedule: &[bool]) -> Result<Vec<f64>> {
    check_len("schedule", schedule.len(), weights.len())?;
    let total: f64 = weights.iter().zip(schedule).filter(|(_, &g)| g).map(|(w, _)| w).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    Ok(weights
        .iter()
        .zip(schedule)
        .map(|(w, &g)| if g { w / total } else { 0.0 })
        .collect())
}
