//! Baseline server with a fully digital array at the centre of the region.
//!
//! The array is reduced to scalar effective channels `g_k = f^H h_k` through
//! a unit-norm receive combiner, after which scheduling and power scaling run
//! exactly as for the waveguide server.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::power::tune_power;
use super::schedule::schedule_devices;
use super::target::snr_optimal_scale;
use super::{OuterRecord, SolveTrace, SolverConfig};
use crate::channel::{mimo_channel, MimoArray, SystemParams};
use crate::error::{Error, Result};
use crate::metrics::{computation_snr, energy_objective, evaluate, AirCompMetrics, TransceiverState};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MimoSolution {
    /// Unit-norm receive combiner.
    pub combiner: Vec<Complex64>,
    pub effective_channel: Vec<Complex64>,
    pub state: TransceiverState,
    pub metrics: AirCompMetrics,
    pub trace: SolveTrace,
}

/// Combiner minimising `||rho f^H H Gamma B - phi^T Gamma||^2 + sigma^2 rho^2 ||f||^2`,
/// returned with unit norm.
///
/// The normal equations `(sum_k c_k c_k^H + sigma^2 I) (rho f) = sum_k c_k phi_k`
/// with `c_k = b_k h_k` fix the direction independently of `rho`.
pub fn optimal_combiner(
    channels: &[Vec<Complex64>],
    state: &TransceiverState,
    weights: &[f64],
    noise_power: f64,
) -> Result<Vec<Complex64>> {
    let m = channels.first().map(Vec::len).ok_or(Error::EmptySchedule)?;
    let mut gram = DMatrix::<Complex64>::identity(m, m);
    let mut rhs = DVector::<Complex64>::zeros(m);
    for k in state.scheduled() {
        let c = DVector::from_iterator(m, channels[k].iter().map(|h| h * state.power_scalings[k] / noise_power.sqrt()));
        gram += &c * c.adjoint();
        rhs += &c * Complex64::new(weights[k] / noise_power.sqrt(), 0.0);
    }
    let solved = gram
        .cholesky()
        .ok_or_else(|| Error::invalid("combiner", "normal equations are not positive definite"))?
        .solve(&rhs);
    let norm = solved.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid("combiner", "zero combiner"));
    }
    Ok(solved.iter().map(|x| x / norm).collect())
}

fn effective(channels: &[Vec<Complex64>], combiner: &[Complex64]) -> Vec<Complex64> {
    channels
        .iter()
        .map(|h| combiner.iter().zip(h).map(|(f, hm)| f.conj() * hm).sum())
        .collect()
}

fn best_scale(g: &[Complex64], state: &TransceiverState, weights: &[f64]) -> Option<f64> {
    let v: Vec<Complex64> = state.scheduled().map(|k| g[k] * state.power_scalings[k]).collect();
    let w: Vec<f64> = state.scheduled().map(|k| weights[k]).collect();
    snr_optimal_scale(&v, &w)
}

/// Alternating schedule / combiner / power loop on the array server.
pub fn optimize_mimo_baseline(
    params: &SystemParams,
    scenario: &Scenario,
    array: &MimoArray,
    config: &SolverConfig,
) -> Result<MimoSolution> {
    config.validate(params)?;
    let channels: Vec<Vec<Complex64>> = scenario
        .devices
        .iter()
        .map(|d| mimo_channel(params, array, d))
        .collect();
    alternate(params, &scenario.weights(), &channels, None, config)
}

/// The array loop with the combiner held at `combiner` (normalised to unit norm).
pub fn optimize_with_combiner(
    params: &SystemParams,
    scenario: &Scenario,
    array: &MimoArray,
    combiner: &[Complex64],
    config: &SolverConfig,
) -> Result<MimoSolution> {
    config.validate(params)?;
    crate::error::check_len("combiner", combiner.len(), array.element_count)?;
    let norm = combiner.iter().map(|f| f.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::invalid("combiner", "zero combiner"));
    }
    let channels: Vec<Vec<Complex64>> = scenario
        .devices
        .iter()
        .map(|d| mimo_channel(params, array, d))
        .collect();
    let unit = combiner.iter().map(|f| f / norm).collect();
    alternate(params, &scenario.weights(), &channels, Some(unit), config)
}

/// Scheduling and power scaling on fixed scalar channels `g`.
pub fn optimize_effective_channel(
    params: &SystemParams,
    weights: &[f64],
    g: &[Complex64],
    config: &SolverConfig,
) -> Result<MimoSolution> {
    config.validate(params)?;
    let channels: Vec<Vec<Complex64>> = g.iter().map(|&x| vec![x]).collect();
    alternate(params, weights, &channels, Some(vec![Complex64::new(1.0, 0.0)]), config)
}

fn alternate(
    params: &SystemParams,
    weights: &[f64],
    channels: &[Vec<Complex64>],
    fixed_combiner: Option<Vec<Complex64>>,
    config: &SolverConfig,
) -> Result<MimoSolution> {
    let k = channels.len();
    if config.min_scheduled > k {
        return Err(Error::invalid(
            "min_scheduled",
            format!("K_min = {} exceeds K = {k}", config.min_scheduled),
        ));
    }
    let sigma2 = params.noise_power;
    let energy_per_objective = params.resolution_bits / params.bandwidth;
    let b0 = vec![Complex64::new(params.power_cap.sqrt(), 0.0); k];
    let mut state = TransceiverState::new(Vec::new(), vec![true; k], b0, 1.0);

    let mut combiner = match &fixed_combiner {
        Some(f) => f.clone(),
        None => optimal_combiner(channels, &state, weights, sigma2)?,
    };
    let mut g = effective(channels, &combiner);
    state.receive_scale = best_scale(&g, &state, weights).unwrap_or(1.0);
    let mut objective = energy_objective(&g, &state, weights, sigma2);
    let mut trace = SolveTrace {
        initial_objective: objective,
        ..SolveTrace::default()
    };

    for iteration in 0..config.outer_iters {
        let before = objective;

        let mut accepted_schedule = false;
        match schedule_devices(&g, &state.power_scalings, state.receive_scale, weights, sigma2, config.min_scheduled) {
            Ok(schedule) if schedule != state.schedule => {
                let candidate = TransceiverState {
                    schedule,
                    ..state.clone()
                };
                let value = energy_objective(&g, &candidate, weights, sigma2);
                if value <= objective {
                    state = candidate;
                    objective = value;
                    accepted_schedule = true;
                }
            }
            Ok(_) | Err(Error::NoFeasibleSchedule) => {}
            Err(e) => return Err(e),
        }

        let mut accepted_placement = false;
        let (f_new, g_new) = match &fixed_combiner {
            Some(_) => (combiner.clone(), g.clone()),
            None => {
                let f = optimal_combiner(channels, &state, weights, sigma2)?;
                let g = effective(channels, &f);
                (f, g)
            }
        };
        if let Some(rho) = best_scale(&g_new, &state, weights) {
            let candidate = TransceiverState {
                receive_scale: rho,
                ..state.clone()
            };
            let value = energy_objective(&g_new, &candidate, weights, sigma2);
            if value <= objective {
                accepted_placement = true;
                state = candidate;
                combiner = f_new;
                g = g_new;
                objective = value;
            }
        }

        let mut etas = Vec::new();
        let mut accepted_power = false;
        let mut power_fallbacks = 0;
        if objective.is_finite() {
            let tuned = tune_power(&g, &state, weights, sigma2, params.power_cap, config)?;
            let candidate = TransceiverState {
                power_scalings: tuned.power_scalings,
                ..state.clone()
            };
            let value = energy_objective(&g, &candidate, weights, sigma2);
            power_fallbacks = tuned.fallback_used.iter().filter(|&&f| f).count();
            etas = tuned.objectives;
            if value <= objective {
                accepted_power = value < objective;
                state = candidate;
                objective = value;
            }
        }

        trace.records.push(OuterRecord {
            iteration,
            objective,
            energy: objective * energy_per_objective,
            residual: 0.0,
            etas,
            schedule: state.schedule.clone(),
            accepted_schedule,
            accepted_placement,
            accepted_power,
            power_fallbacks,
        });

        if before.is_finite() && before - objective <= config.tolerance * before {
            break;
        }
    }

    if !objective.is_finite() {
        let snr = computation_snr(&g, &state, weights, sigma2).unwrap_or(0.0);
        return Err(Error::InfeasibleStart(snr));
    }
    let metrics = evaluate(&g, &state, weights, sigma2, params.bandwidth, params.resolution_bits)?;
    Ok(MimoSolution {
        combiner,
        effective_channel: g,
        state,
        metrics,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_antenna_combiner_cancels_phase() {
        let h = Complex64::from_polar(1e-4, 1.234);
        let st = TransceiverState::new(vec![], vec![true], vec![Complex64::new(0.03, 0.0)], 1.0);
        let f = optimal_combiner(&[vec![h]], &st, &[1.0], 1e-12).unwrap();
        let g = f[0].conj() * h;
        assert!((f[0].norm() - 1.0).abs() < 1e-12);
        assert!(g.arg().abs() < 1e-9);
        assert!((g.norm() - 1e-4).abs() < 1e-16);
    }
}
