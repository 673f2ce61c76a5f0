//! One aggregation round: standardise, superpose over the channel, rescale.

use num_complex::Complex64;
use rand::Rng;

use super::normalize::{pooled_reference, renormalized_weights, NormalizationStats};
use crate::error::{check_len, Error, Result};
use crate::metrics::{computation_snr, noisy_aggregate, TransceiverState};

/// How local statistics reach the server.
#[derive(Debug, Clone, Copy)]
pub enum Uplink<'a> {
    /// Error-free weighted averaging over the scheduled devices.
    Ideal { schedule: &'a [bool] },
    /// Analog superposition `rho (sum h_k b_k x_k + z)`, one channel use per entry.
    Analog {
        channel: &'a [Complex64],
        state: &'a TransceiverState,
        noise_power: f64,
    },
}

impl Uplink<'_> {
    pub fn schedule(&self) -> &[bool] {
        match self {
            Uplink::Ideal { schedule } => schedule,
            Uplink::Analog { state, .. } => &state.schedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    /// Renormalised weighted average as recovered by the server.
    pub global: Vec<f64>,
    /// Mean `|theta_hat - theta|^2` per entry in the standardised domain.
    pub empirical_mse: f64,
}

/// Aggregates the scheduled devices' vectors. `local[k]` is ignored for
/// unscheduled devices and may be empty.
pub fn run_round<R: Rng + ?Sized>(uplink: Uplink<'_>, local: &[Vec<f64>], weights: &[f64], noise: &mut R) -> Result<RoundOutcome> {
    let schedule = uplink.schedule();
    check_len("local statistics", local.len(), schedule.len())?;
    check_len("weights", weights.len(), schedule.len())?;
    let scheduled: Vec<usize> = (0..schedule.len()).filter(|&k| schedule[k]).collect();
    let first = *scheduled.first().ok_or(Error::EmptySchedule)?;
    let d = local[first].len();
    for &k in &scheduled {
        check_len("local statistics", local[k].len(), d)?;
    }

    match uplink {
        Uplink::Ideal { .. } => {
            let w = renormalized_weights(weights, schedule)?;
            let mut global = vec![0.0; d];
            for &k in &scheduled {
                for (g, s) in global.iter_mut().zip(&local[k]) {
                    *g += w[k] * s;
                }
            }
            Ok(RoundOutcome {
                global,
                empirical_mse: 0.0,
            })
        }
        Uplink::Analog {
            channel,
            state,
            noise_power,
        } => {
            check_len("channel", channel.len(), schedule.len())?;
            let snr = computation_snr(channel, state, weights, noise_power)?;
            if !(snr > 1.0) {
                return Err(Error::NonPositiveRate);
            }
            let stats = local
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    if schedule[k] {
                        NormalizationStats::of(s)
                    } else {
                        Ok(NormalizationStats { mean: 0.0, std: 1.0 })
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let reference = pooled_reference(&stats, weights, schedule)?;
            let total: f64 = scheduled.iter().map(|&k| weights[k]).sum();

            let mut entry = vec![0.0; schedule.len()];
            let mut global = Vec::with_capacity(d);
            let mut squared_error = 0.0;
            for j in 0..d {
                for &k in &scheduled {
                    entry[k] = (local[k][j] - reference.mean) / reference.std;
                }
                let estimate = noisy_aggregate(channel, state, &entry, noise_power, noise);
                let target: f64 = scheduled.iter().map(|&k| weights[k] * entry[k]).sum();
                squared_error += (estimate - target).norm_sqr();
                global.push((reference.std * estimate.re + reference.mean * total) / total);
            }
            Ok(RoundOutcome {
                global,
                empirical_mse: if d == 0 { 0.0 } else { squared_error / d as f64 },
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn inverted(h: &[Complex64], weights: &[f64], rho: f64, schedule: Vec<bool>) -> TransceiverState {
        let b = h.iter().zip(weights).map(|(hk, w)| w / (rho * hk)).collect();
        TransceiverState::new(vec![], schedule, b, rho)
    }

    #[test]
    fn single_device_noiseless_returns_its_vector() {
        let h = [Complex64::new(0.3, -0.4), Complex64::new(1.0, 0.2)];
        let w = [0.5, 0.5];
        let st = inverted(&h, &w, 2.0, vec![false, true]);
        let local = vec![vec![], vec![0.1, -3.0, 7.5, 0.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = run_round(
            Uplink::Analog {
                channel: &h,
                state: &st,
                noise_power: 0.0,
            },
            &local,
            &w,
            &mut rng,
        )
        .unwrap();
        for (a, b) in out.global.iter().zip(&local[1]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_schedule_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = run_round(Uplink::Ideal { schedule: &[false, false] }, &[vec![1.0], vec![2.0]], &[0.5, 0.5], &mut rng);
        assert!(matches!(r, Err(Error::EmptySchedule)));
    }
}
