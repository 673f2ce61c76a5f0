//! Aggregation error, computation SNR/rate and the resulting transmission
//! energy of one over-the-air aggregation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Positions, schedule, device power scalings and receive scale of one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransceiverState {
    pub positions: Vec<f64>,
    pub schedule: Vec<bool>,
    pub power_scalings: Vec<Complex64>,
    pub receive_scale: f64,
}

impl TransceiverState {
    pub fn new(positions: Vec<f64>, schedule: Vec<bool>, power_scalings: Vec<Complex64>, receive_scale: f64) -> Self {
        TransceiverState {
            positions,
            schedule,
            power_scalings,
            receive_scale,
        }
    }

    pub fn device_count(&self) -> usize {
        self.schedule.len()
    }

    pub fn scheduled_count(&self) -> usize {
        self.schedule.iter().filter(|&&g| g).count()
    }

    pub fn scheduled(&self) -> impl Iterator<Item = usize> + '_ {
        self.schedule
            .iter()
            .enumerate()
            .filter_map(|(k, &g)| g.then_some(k))
    }

    /// `sum_k gamma_k |b_k|^2`
    pub fn scheduled_power(&self) -> f64 {
        self.scheduled().map(|k| self.power_scalings[k].norm_sqr()).sum()
    }

    fn check(&self, h: &[Complex64], weights: &[f64]) -> Result<()> {
        let k = self.schedule.len();
        check_len("power_scalings", self.power_scalings.len(), k)?;
        check_len("channel", h.len(), k)?;
        check_len("weights", weights.len(), k)
    }

    /// Power cap (C1) and participation floor (C3).
    pub fn satisfies_power_and_schedule(&self, power_cap: f64, min_scheduled: usize) -> bool {
        self.power_scalings
            .iter()
            .all(|b| b.norm_sqr() <= power_cap * (1.0 + 1e-12))
            && self.scheduled_count() >= min_scheduled
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AirCompMetrics {
    pub mse: f64,
    pub snr: f64,
    /// bits/s
    pub rate: f64,
    /// seconds per model entry
    pub time: f64,
    pub per_device_energy: Vec<f64>,
    pub total_energy: f64,
}

/// Signal part `(|rho h_k b_k|^2, |rho h_k b_k - phi_k|^2)` summed over the schedule.
fn alignment_terms(h: &[Complex64], state: &TransceiverState, weights: &[f64]) -> (f64, f64) {
    let rho = state.receive_scale;
    state.scheduled().fold((0.0, 0.0), |(sig, mis), k| {
        let v = h[k] * state.power_scalings[k] * rho;
        (sig + v.norm_sqr(), mis + (v - weights[k]).norm_sqr())
    })
}

/// `eps = ||rho h^T Gamma B - phi^T Gamma||^2 + sigma^2 rho^2`
pub fn aggregation_mse(h: &[Complex64], state: &TransceiverState, weights: &[f64], noise_power: f64) -> Result<f64> {
    state.check(h, weights)?;
    let (_, mis) = alignment_terms(h, state, weights);
    let rho = state.receive_scale;
    Ok(mis + noise_power * rho * rho)
}

/// Ratio of the estimate's second moment to the aggregation error.
pub fn computation_snr(h: &[Complex64], state: &TransceiverState, weights: &[f64], noise_power: f64) -> Result<f64> {
    state.check(h, weights)?;
    let (sig, mis) = alignment_terms(h, state, weights);
    let noise = noise_power * state.receive_scale * state.receive_scale;
    let mse = mis + noise;
    if mse <= 0.0 {
        return Err(Error::DegenerateMse);
    }
    Ok((sig + noise) / mse)
}

/// `B log2(snr)`, negative below unit SNR.
pub fn computation_rate(snr: f64, bandwidth: f64) -> f64 {
    bandwidth * snr.log2()
}

pub fn transmission_time(resolution_bits: f64, rate: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::NonPositiveRate);
    }
    Ok(resolution_bits / rate)
}

/// Per-device energy `gamma_k |b_k|^2 t` and its total.
pub fn round_energy(state: &TransceiverState, time: f64) -> (Vec<f64>, f64) {
    let per: Vec<f64> = state
        .schedule
        .iter()
        .zip(&state.power_scalings)
        .map(|(&g, b)| if g { b.norm_sqr() * time } else { 0.0 })
        .collect();
    let total = per.iter().sum();
    (per, total)
}

/// Noiseless target `theta = sum_k phi_k gamma_k s_k`.
pub fn ideal_aggregate(weights: &[f64], schedule: &[bool], samples: &[f64]) -> f64 {
    weights
        .iter()
        .zip(schedule)
        .zip(samples)
        .filter(|((_, &g), _)| g)
        .map(|((w, _), s)| w * s)
        .sum()
}

/// One analog channel use: `theta_hat = rho (sum_k h_k gamma_k b_k s_k + z)`
/// with `z ~ CN(0, sigma^2)` drawn from `noise`.
pub fn noisy_aggregate<R: Rng + ?Sized>(
    h: &[Complex64],
    state: &TransceiverState,
    samples: &[f64],
    noise_power: f64,
    noise: &mut R,
) -> Complex64 {
    let superposed: Complex64 = state
        .scheduled()
        .map(|k| h[k] * state.power_scalings[k] * samples[k])
        .sum();
    let z = complex_gaussian(noise_power, noise);
    (superposed + z) * state.receive_scale
}

pub(crate) fn complex_gaussian<R: Rng + ?Sized>(power: f64, rng: &mut R) -> Complex64 {
    let s = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Objective of the energy problem: `sum gamma_k |b_k|^2 / log2(snr)`.
/// `+inf` when the state cannot carry a positive computation rate.
pub fn energy_objective(h: &[Complex64], state: &TransceiverState, weights: &[f64], noise_power: f64) -> f64 {
    match computation_snr(h, state, weights, noise_power) {
        Ok(snr) if snr > 1.0 => state.scheduled_power() / snr.log2(),
        _ => f64::INFINITY,
    }
}

/// Full metric set for a state, failing when the rate is not positive.
pub fn evaluate(
    h: &[Complex64],
    state: &TransceiverState,
    weights: &[f64],
    noise_power: f64,
    bandwidth: f64,
    resolution_bits: f64,
) -> Result<AirCompMetrics> {
    let mse = aggregation_mse(h, state, weights, noise_power)?;
    let snr = computation_snr(h, state, weights, noise_power)?;
    let rate = computation_rate(snr, bandwidth);
    let time = transmission_time(resolution_bits, rate)?;
    let (per_device_energy, total_energy) = round_energy(state, time);
    Ok(AirCompMetrics {
        mse,
        snr,
        rate,
        time,
        per_device_energy,
        total_energy,
    })
}
