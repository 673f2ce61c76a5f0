//! Gauss-Seidel placement of the pinching elements towards the relaxed target.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::target::{closed_form_target, snr_optimal_scale, RelaxedTarget};
use super::SolverConfig;
use crate::channel::{channel_vector, check_fits, element_response, norm_bound, Device, SystemParams};
use crate::error::{check_len, Error, Result};
use crate::metrics::TransceiverState;
use crate::scenario::Scenario;

/// Grid sizes above this are evaluated on the rayon pool.
const PARALLEL_GRID: usize = 256;

/// Coarse grid points refined independently per coordinate.
const REFINE_SEEDS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementOutcome {
    pub positions: Vec<f64>,
    pub receive_scale: f64,
    pub target: RelaxedTarget,
    /// Residual at entry followed by the residual after every completed sweep.
    pub residuals: Vec<f64>,
}

/// `||Gamma B h(l) - v||` for a full-length target `v` (zeros off-schedule).
pub fn placement_residual(h: &[Complex64], state: &TransceiverState, target: &[Complex64]) -> Result<f64> {
    let k = state.device_count();
    check_len("channel", h.len(), k)?;
    check_len("target", target.len(), k)?;
    check_len("power_scalings", state.power_scalings.len(), k)?;
    let sum: f64 = (0..k)
        .map(|i| {
            let own = if state.schedule[i] {
                state.power_scalings[i] * h[i]
            } else {
                Complex64::new(0.0, 0.0)
            };
            (own - target[i]).norm_sqr()
        })
        .sum();
    Ok(sum.sqrt())
}

/// Full-length relaxed target for the current schedule and power scalings.
pub fn relaxed_target(
    params: &SystemParams,
    scenario: &Scenario,
    state: &TransceiverState,
) -> Result<(RelaxedTarget, Vec<Complex64>)> {
    let scheduled: Vec<usize> = state.scheduled().collect();
    if scheduled.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let devices: Vec<Device> = scheduled.iter().map(|&k| scenario.devices[k]).collect();
    let bound = norm_bound(params, scenario.element_count, scenario.altitude, &devices)?;
    let power = state.scheduled_power();
    let weights: Vec<f64> = scheduled.iter().map(|&k| scenario.devices[k].weight).collect();
    let target = closed_form_target(&weights, bound.sqrt() * power.sqrt())?;
    let mut full = vec![Complex64::new(0.0, 0.0); state.device_count()];
    for (&k, &v) in scheduled.iter().zip(&target.effective_channel) {
        full[k] = Complex64::new(v, 0.0);
    }
    Ok((target, full))
}

/// One Gauss-Seidel run over the element positions, followed by the receive
/// scale that maximises the SNR for the placed geometry.
///
/// Each coordinate is searched on a coarse grid over its feasible interval
/// and refined around the incumbent; the incumbent itself is always a
/// candidate, so no sweep increases the residual.
pub fn tune_pass(
    params: &SystemParams,
    scenario: &Scenario,
    state: &TransceiverState,
    config: &SolverConfig,
) -> Result<PlacementOutcome> {
    let n_elem = scenario.element_count;
    let length = scenario.waveguide_length;
    let spacing = params.min_spacing;
    check_fits(n_elem, length, spacing)?;
    check_len("positions", state.positions.len(), n_elem)?;
    check_len("schedule", state.schedule.len(), scenario.device_count())?;
    if !scenario.waveguide(state.positions.clone()).is_feasible(spacing) {
        return Err(Error::invalid("positions", "initial placement violates the spacing constraint"));
    }

    let (target, v) = relaxed_target(params, scenario, state)?;
    let v_norm = target.norm_budget;
    let coarse = config.coarse_step(params);
    let refinements = config.grid_refinements;

    let scheduled: Vec<usize> = state.scheduled().collect();
    let devices: Vec<Device> = scheduled.iter().map(|&k| scenario.devices[k]).collect();
    let gains: Vec<Complex64> = scheduled.iter().map(|&k| state.power_scalings[k]).collect();
    let goal: Vec<Complex64> = scheduled.iter().map(|&k| v[k]).collect();
    let altitude = scenario.altitude;

    let channel_of = |positions: &[f64]| -> Vec<Complex64> {
        channel_vector(params, &scenario.waveguide(positions.to_vec()), &devices)
    };
    let residual_of = |h: &[Complex64]| -> f64 {
        h.iter()
            .zip(&gains)
            .zip(&goal)
            .map(|((hk, bk), vk)| (bk * hk - vk).norm_sqr())
            .sum::<f64>()
            .sqrt()
    };

    let mut positions = state.positions.clone();
    let mut h = channel_of(&positions);
    let mut residual = residual_of(&h);
    let mut residuals = vec![residual];

    let mut sweeps = 0;
    while residual > config.tolerance * v_norm && sweeps < config.placement_sweeps {
        let before = positions.clone();
        for n in 0..n_elem {
            let lo = if n == 0 { 0.0 } else { positions[n - 1] + spacing };
            let hi = if n + 1 == n_elem { length } else { positions[n + 1] - spacing };
            let current = positions[n];
            // residual target once element n is removed: r_k = v_k - b_k h_k^{-n}
            let rest: Vec<Complex64> = devices
                .iter()
                .zip(&h)
                .zip(&gains)
                .zip(&goal)
                .map(|(((dev, hk), bk), vk)| vk - bk * (hk - element_response(params, altitude, current, dev)))
                .collect();
            let cost = |ell: f64| -> f64 {
                devices
                    .iter()
                    .zip(&gains)
                    .zip(&rest)
                    .map(|((dev, bk), rk)| (bk * element_response(params, altitude, ell, dev) - rk).norm_sqr())
                    .sum()
            };
            let best = grid_search(lo, hi, coarse, refinements, current, &cost);
            if best != current {
                for (hk, dev) in h.iter_mut().zip(&devices) {
                    *hk += element_response(params, altitude, best, dev) - element_response(params, altitude, current, dev);
                }
                positions[n] = best;
            }
        }
        sweeps += 1;
        // Fresh evaluation so incremental updates cannot accumulate drift.
        h = channel_of(&positions);
        let next = residual_of(&h);
        if next > residual {
            positions = before;
            h = channel_of(&positions);
            break;
        }
        let stalled = residual - next <= config.tolerance * residual;
        residual = next;
        residuals.push(residual);
        if stalled {
            break;
        }
    }

    let achieved: Vec<Complex64> = h.iter().zip(&gains).map(|(hk, bk)| bk * hk).collect();
    let weights: Vec<f64> = scheduled.iter().map(|&k| scenario.devices[k].weight).collect();
    let receive_scale = snr_optimal_scale(&achieved, &weights).unwrap_or(target.receive_scale);

    Ok(PlacementOutcome {
        positions,
        receive_scale,
        target,
        residuals,
    })
}

/// Coarse grid over `[lo, hi]`, then `refinements` passes at a quarter of the
/// previous step around each of the best coarse points. The incumbent wins ties.
pub(crate) fn grid_search<F>(lo: f64, hi: f64, step: f64, refinements: usize, current: f64, cost: &F) -> f64
where
    F: Fn(f64) -> f64 + Sync,
{
    let scan = |a: f64, b: f64, h: f64| -> Vec<(f64, f64)> {
        let (a, b) = (a.max(lo), b.min(hi));
        if b < a {
            return Vec::new();
        }
        let count = ((b - a) / h).floor() as usize + 1;
        let mut points: Vec<f64> = (0..count).map(|i| (a + i as f64 * h).min(b)).collect();
        if points[count - 1] < b {
            points.push(b);
        }
        if points.len() > PARALLEL_GRID {
            points.into_par_iter().map(|x| (x, cost(x))).collect()
        } else {
            points.into_iter().map(|x| (x, cost(x))).collect()
        }
    };

    let mut best = (current, cost(current));
    let mut coarse = scan(lo, hi, step);
    coarse.sort_by(|a, b| a.1.total_cmp(&b.1));
    for &(x, c) in coarse.iter().take(REFINE_SEEDS) {
        let mut local = (x, c);
        let mut h = step;
        for _ in 0..refinements {
            let fine = h / 4.0;
            for (y, cy) in scan(local.0 - h, local.0 + h, fine) {
                if cy < local.1 {
                    local = (y, cy);
                }
            }
            h = fine;
        }
        if local.1 < best.1 {
            best = local;
        }
    }
    best.0
}
