//! Dinkelbach iteration for the transmit power scalings with a
//! minorization-minimization inner step.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::SolverConfig;
use crate::error::{check_len, Error, Result};
use crate::metrics::{computation_snr, energy_objective, TransceiverState};

/// Backtracking factors tried when a full MM step does not lower the ratio.
const BACKTRACK: [f64; 6] = [0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerStep {
    pub power_scalings: Vec<Complex64>,
    /// Devices whose MM denominator was not positive.
    pub fallback: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerOutcome {
    pub power_scalings: Vec<Complex64>,
    /// Ratio `eta^t` at entry and after every accepted iteration.
    pub objectives: Vec<f64>,
    /// Whether accepted iteration `t` used the non-positive-denominator fallback.
    pub fallback_used: Vec<bool>,
    pub iterations: usize,
}

/// Projection onto `|x|^2 <= P`.
pub fn project_power(x: Complex64, power_cap: f64) -> Complex64 {
    if x.norm_sqr() > power_cap {
        x * (power_cap.sqrt() / x.norm())
    } else {
        x
    }
}

/// `(tau, kappa)`: second moment of the estimate and the aggregation error
/// at the current scalings.
fn moments(h: &[Complex64], state: &TransceiverState, weights: &[f64], noise_power: f64) -> (f64, f64) {
    let rho = state.receive_scale;
    let noise = noise_power * rho * rho;
    let (sig, mis) = state.scheduled().fold((0.0, 0.0), |(s, m), k| {
        let v = h[k] * state.power_scalings[k] * rho;
        (s + v.norm_sqr(), m + (v - weights[k]).norm_sqr())
    });
    (sig + noise, mis + noise)
}

/// One surrogate update of the scheduled scalings for Dinkelbach level `eta`.
///
/// Stationarity of `||b||^2 - eta log2(tau(b)/kappa(b))` with `tau`, `kappa`
/// frozen at the current iterate gives
/// `b_k = conj(rho h_k) phi_k / kappa / (ln2/eta - |rho h_k|^2 (1/tau - 1/kappa))`,
/// projected onto the power cap. A non-positive denominator falls back to the
/// full-power point with phase `conj(rho h_k) phi_k`.
pub fn power_update_step(
    h: &[Complex64],
    state: &TransceiverState,
    weights: &[f64],
    noise_power: f64,
    power_cap: f64,
    eta: f64,
) -> Result<PowerStep> {
    let k = state.device_count();
    check_len("channel", h.len(), k)?;
    check_len("weights", weights.len(), k)?;
    check_len("power_scalings", state.power_scalings.len(), k)?;
    if state.scheduled_count() == 0 {
        return Err(Error::EmptySchedule);
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid("eta", format!("must be positive and finite, got {eta}")));
    }
    let rho = state.receive_scale;
    let (tau, kappa) = moments(h, state, weights, noise_power);
    let mut next = state.power_scalings.clone();
    let mut fallback = Vec::new();
    for i in state.scheduled() {
        let g = (h[i] * rho).conj();
        let numerator = g * weights[i] / kappa;
        let denominator = LN_2 / eta - g.norm_sqr() * (1.0 / tau - 1.0 / kappa);
        next[i] = if denominator > 0.0 {
            project_power(numerator / denominator, power_cap)
        } else {
            fallback.push(i);
            let dir = g * weights[i];
            if dir.norm() > 0.0 {
                dir * (power_cap.sqrt() / dir.norm())
            } else {
                Complex64::new(power_cap.sqrt(), 0.0)
            }
        };
    }
    Ok(PowerStep {
        power_scalings: next,
        fallback,
    })
}

/// Dinkelbach loop over the scheduled power scalings with the receive scale
/// and placement held fixed.
///
/// Steps that would raise the energy ratio are shortened by backtracking and
/// the loop ends when no shortened step helps, after `power_iters`
/// iterations, or when the scalings move by at most `tolerance` relative.
pub fn tune_power(
    h: &[Complex64],
    state: &TransceiverState,
    weights: &[f64],
    noise_power: f64,
    power_cap: f64,
    config: &SolverConfig,
) -> Result<PowerOutcome> {
    let snr = computation_snr(h, state, weights, noise_power)?;
    if !(snr > 1.0) {
        return Err(Error::InfeasibleStart(snr));
    }
    let mut current = state.clone();
    let mut eta = energy_objective(h, &current, weights, noise_power);
    let mut objectives = vec![eta];
    let mut fallback_used = Vec::new();
    let mut iterations = 0;

    while iterations < config.power_iters {
        let step = power_update_step(h, &current, weights, noise_power, power_cap, eta)?;
        let mut candidate = step.power_scalings.clone();

        // Fallback entries are kept only when they help.
        if !step.fallback.is_empty() {
            let mut kept = candidate.clone();
            for &i in &step.fallback {
                kept[i] = current.power_scalings[i];
            }
            if ratio(h, &current, &kept, weights, noise_power) < ratio(h, &current, &candidate, weights, noise_power) {
                candidate = kept;
            }
        }

        let mut accepted = None;
        let full = ratio(h, &current, &candidate, weights, noise_power);
        if full <= eta {
            accepted = Some((candidate.clone(), full));
        } else {
            for beta in BACKTRACK {
                let mixed: Vec<Complex64> = current
                    .power_scalings
                    .iter()
                    .zip(&candidate)
                    .map(|(old, new)| project_power(old + (new - old) * beta, power_cap))
                    .collect();
                let value = ratio(h, &current, &mixed, weights, noise_power);
                if value <= eta {
                    accepted = Some((mixed, value));
                    break;
                }
            }
        }
        let Some((next, value)) = accepted else { break };

        iterations += 1;
        let moved: f64 = current
            .scheduled()
            .map(|i| (next[i] - current.power_scalings[i]).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let scale = current.scheduled_power().sqrt().max(f64::MIN_POSITIVE);
        current.power_scalings = next;
        eta = value;
        objectives.push(eta);
        fallback_used.push(!step.fallback.is_empty());
        if moved <= config.tolerance * scale {
            break;
        }
    }

    Ok(PowerOutcome {
        power_scalings: current.power_scalings,
        objectives,
        fallback_used,
        iterations,
    })
}

fn ratio(h: &[Complex64], state: &TransceiverState, scalings: &[Complex64], weights: &[f64], noise_power: f64) -> f64 {
    let trial = TransceiverState {
        power_scalings: scalings.to_vec(),
        ..state.clone()
    };
    energy_objective(h, &trial, weights, noise_power)
}
