use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::placement::{placement_residual, relaxed_target, tune_pass};
use super::power::tune_power;
use super::schedule::schedule_devices;
use super::target::snr_optimal_scale;
use super::{OuterRecord, SolveTrace, SolverConfig};
use crate::channel::{channel_vector, check_fits, SystemParams, Waveguide};
use crate::error::{Error, Result};
use crate::metrics::{computation_snr, energy_objective, evaluate, AirCompMetrics, TransceiverState};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSolution {
    pub state: TransceiverState,
    pub metrics: AirCompMetrics,
    pub channel: Vec<Complex64>,
    pub trace: SolveTrace,
}

/// Full participation at full power, evenly spread elements and the receive
/// scale that best fits the resulting effective channel.
pub fn initial_state(params: &SystemParams, scenario: &Scenario, positions: Vec<f64>) -> Result<TransceiverState> {
    let k = scenario.device_count();
    let b = vec![Complex64::new(params.power_cap.sqrt(), 0.0); k];
    let mut state = TransceiverState::new(positions, vec![true; k], b, 1.0);
    let h = channel_vector(params, &scenario.waveguide(state.positions.clone()), &scenario.devices);
    state.receive_scale = fitted_scale(params, scenario, &state, &h)?;
    Ok(state)
}

fn fitted_scale(params: &SystemParams, scenario: &Scenario, state: &TransceiverState, h: &[Complex64]) -> Result<f64> {
    let weights: Vec<f64> = state.scheduled().map(|k| scenario.devices[k].weight).collect();
    let v: Vec<Complex64> = state.scheduled().map(|k| h[k] * state.power_scalings[k]).collect();
    match snr_optimal_scale(&v, &weights) {
        Some(rho) => Ok(rho),
        None => Ok(relaxed_target(params, scenario, state)?.0.receive_scale),
    }
}

/// Alternates scheduling, placement and power scaling until the energy per
/// model entry stops improving.
///
/// A step is kept only if it does not raise the energy objective, so the
/// recorded energies never increase. On failure the solve is retried from
/// jittered placements before the error is surfaced.
pub fn joint_optimize(params: &SystemParams, scenario: &Scenario, config: &SolverConfig) -> Result<JointSolution> {
    config.validate(params)?;
    let k = scenario.device_count();
    if config.min_scheduled > k {
        return Err(Error::invalid(
            "min_scheduled",
            format!("K_min = {} exceeds K = {k}", config.min_scheduled),
        ));
    }
    check_fits(scenario.element_count, scenario.waveguide_length, params.min_spacing)?;
    let uniform = Waveguide::uniform(
        scenario.waveguide_length,
        scenario.altitude,
        scenario.element_count,
        params.min_spacing,
    )?
    .positions;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut last_err = None;
    for attempt in 0..=config.restarts {
        let positions = if attempt == 0 {
            uniform.clone()
        } else {
            jitter(&uniform, scenario.waveguide_length, params.min_spacing, &mut rng)
        };
        match solve_from(params, scenario, config, positions) {
            Ok(mut sol) => {
                sol.trace.restarts = attempt;
                return Ok(sol);
            }
            Err(e @ (Error::NoFeasibleSchedule | Error::InfeasibleStart(_))) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::NoFeasibleSchedule))
}

/// Moves every element by a random fraction of the free space around it.
fn jitter<R: Rng>(positions: &[f64], length: f64, spacing: f64, rng: &mut R) -> Vec<f64> {
    let mut out = positions.to_vec();
    let n = out.len();
    for i in 0..n {
        let lo = if i == 0 { 0.0 } else { out[i - 1] + spacing };
        let hi = if i + 1 == n { length } else { out[i + 1] - spacing };
        if hi > lo {
            out[i] = lo + rng.random::<f64>() * (hi - lo);
        }
    }
    out
}

fn solve_from(
    params: &SystemParams,
    scenario: &Scenario,
    config: &SolverConfig,
    positions: Vec<f64>,
) -> Result<JointSolution> {
    let weights = scenario.weights();
    let sigma2 = params.noise_power;
    let energy_per_objective = params.resolution_bits / params.bandwidth;
    let channel_at = |pos: &[f64]| channel_vector(params, &scenario.waveguide(pos.to_vec()), &scenario.devices);

    let mut state = initial_state(params, scenario, positions)?;
    let mut h = channel_at(&state.positions);
    let mut objective = energy_objective(&h, &state, &weights, sigma2);
    let mut trace = SolveTrace {
        initial_objective: objective,
        ..SolveTrace::default()
    };

    for iteration in 0..config.outer_iters {
        let before = objective;

        let mut accepted_schedule = false;
        match schedule_devices(&h, &state.power_scalings, state.receive_scale, &weights, sigma2, config.min_scheduled) {
            Ok(schedule) if schedule != state.schedule => {
                let candidate = TransceiverState {
                    schedule,
                    ..state.clone()
                };
                let value = energy_objective(&h, &candidate, &weights, sigma2);
                if value <= objective {
                    state = candidate;
                    objective = value;
                    accepted_schedule = true;
                }
            }
            Ok(_) | Err(Error::NoFeasibleSchedule) => {}
            Err(e) => return Err(e),
        }

        let placed = tune_pass(params, scenario, &state, config)?;
        let candidate = TransceiverState {
            positions: placed.positions.clone(),
            receive_scale: placed.receive_scale,
            ..state.clone()
        };
        let h_candidate = channel_at(&candidate.positions);
        let value = energy_objective(&h_candidate, &candidate, &weights, sigma2);
        let accepted_placement = value <= objective;
        if accepted_placement {
            state = candidate;
            h = h_candidate;
            objective = value;
        }

        let mut etas = Vec::new();
        let mut accepted_power = false;
        let mut power_fallbacks = 0;
        if objective.is_finite() {
            let tuned = tune_power(&h, &state, &weights, sigma2, params.power_cap, config)?;
            let candidate = TransceiverState {
                power_scalings: tuned.power_scalings,
                ..state.clone()
            };
            let value = energy_objective(&h, &candidate, &weights, sigma2);
            power_fallbacks = tuned.fallback_used.iter().filter(|&&f| f).count();
            etas = tuned.objectives;
            if value <= objective {
                accepted_power = value < objective;
                state = candidate;
                objective = value;
            }
        }

        let (_, v) = relaxed_target(params, scenario, &state)?;
        trace.records.push(OuterRecord {
            iteration,
            objective,
            energy: objective * energy_per_objective,
            residual: placement_residual(&h, &state, &v)?,
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
        let snr = computation_snr(&h, &state, &weights, sigma2).unwrap_or(0.0);
        return Err(Error::InfeasibleStart(snr));
    }
    let metrics = evaluate(&h, &state, &weights, sigma2, params.bandwidth, params.resolution_bits)?;
    Ok(JointSolution {
        state,
        metrics,
        channel: h,
        trace,
    })
}
