use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solution of the norm-constrained relaxation of the placement problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedTarget {
    pub receive_scale: f64,
    /// Target effective channel `v*`, aligned with the weights.
    pub effective_channel: Vec<f64>,
    pub norm_budget: f64,
}

/// Maximiser of the relaxed SNR over `||v|| <= Q`: the effective channel is
/// co-linear with the weights and saturates the budget, and the receive scale
/// inverts it exactly, `rho* v* = phi`.
pub fn closed_form_target(weights: &[f64], norm_budget: f64) -> Result<RelaxedTarget> {
    let phi_norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if !(phi_norm > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    if !(norm_budget > 0.0) {
        return Err(Error::invalid("norm_budget", "must be positive"));
    }
    let gain = norm_budget / phi_norm;
    Ok(RelaxedTarget {
        receive_scale: phi_norm / norm_budget,
        effective_channel: weights.iter().map(|w| gain * w).collect(),
        norm_budget,
    })
}

/// `F(v, rho) = (||rho v||^2 + sigma^2 rho^2) / (||rho v - phi||^2 + sigma^2 rho^2)`
pub fn relaxed_objective(v: &[Complex64], rho: f64, weights: &[f64], noise_power: f64) -> f64 {
    let noise = noise_power * rho * rho;
    let (sig, mis) = v.iter().zip(weights).fold((0.0, 0.0), |(s, m), (vk, w)| {
        let rv = vk * rho;
        (s + rv.norm_sqr(), m + (rv - w).norm_sqr())
    });
    (sig + noise) / (mis + noise)
}

/// Receive scale maximising the SNR for an achieved effective channel
/// `v_k = b_k h_k` (scheduled entries only; zeros elsewhere).
///
/// With `x = 1/rho` the SNR is `(||v||^2 + sigma^2) / (||v - x phi||^2 + sigma^2)`,
/// minimised over real `x` at `x = Re<phi, v> / ||phi||^2`. Coincides with the
/// closed-form target's scale whenever `v = v*`. Returns `None` when the
/// projection is not positive.
pub fn snr_optimal_scale(v: &[Complex64], weights: &[f64]) -> Option<f64> {
    let phi2: f64 = weights.iter().map(|w| w * w).sum();
    let proj: f64 = v.iter().zip(weights).map(|(vk, w)| vk.re * w).sum();
    (proj > 0.0 && phi2 > 0.0).then(|| phi2 / proj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_example() {
        let t = closed_form_target(&[1.0], 2.0).unwrap();
        assert_eq!(t.receive_scale, 0.5);
        assert_eq!(t.effective_channel, vec![2.0]);
    }

    #[test]
    fn unit_norm_weights() {
        let t = closed_form_target(&[0.6, 0.8], 1.0).unwrap();
        assert!((t.receive_scale - 1.0).abs() < 1e-12);
        assert!((t.effective_channel[0] - 0.6).abs() < 1e-12);
        assert!((t.effective_channel[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn degenerate_weights() {
        assert!(matches!(closed_form_target(&[0.0, 0.0], 1.0), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn optimum_value() {
        let phi = [0.2, 0.5, 0.3];
        let (q, sigma2): (f64, f64) = (1.7, 0.09);
        let t = closed_form_target(&phi, q).unwrap();
        let v: Vec<Complex64> = t.effective_channel.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        assert!((norm - q).abs() < 1e-12);
        let f = relaxed_objective(&v, t.receive_scale, &phi, sigma2);
        assert!((f / (1.0 + q * q / sigma2) - 1.0).abs() < 1e-10);
        assert_eq!(snr_optimal_scale(&v, &phi).map(|r| (r / t.receive_scale - 1.0).abs() < 1e-12), Some(true));
    }

    #[test]
    fn optimal_scale_beats_neighbours() {
        let phi = [0.25, 0.25, 0.5];
        let v = [Complex64::new(0.3, 0.1), Complex64::new(0.05, -0.2), Complex64::new(0.7, 0.3)];
        let rho = snr_optimal_scale(&v, &phi).unwrap();
        let best = relaxed_objective(&v, rho, &phi, 0.01);
        for factor in [0.5, 0.9, 0.99, 1.01, 1.1, 2.0] {
            assert!(relaxed_objective(&v, rho * factor, &phi, 0.01) <= best);
        }
        let opposed = [Complex64::new(-1.0, 0.0); 3];
        assert!(snr_optimal_scale(&opposed, &phi).is_none());
    }
}
