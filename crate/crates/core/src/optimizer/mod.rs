//! Alternating minimisation of the per-entry transmission energy over
//! scheduling, element placement, receive scaling and power scalings.

mod joint;
mod mimo;
mod placement;
mod power;
mod schedule;
mod target;

use serde::{Deserialize, Serialize};

pub use joint::{initial_state, joint_optimize, JointSolution};
pub use mimo::{optimize_effective_channel, optimize_mimo_baseline, optimize_with_combiner, optimal_combiner, MimoSolution};
pub use placement::{placement_residual, relaxed_target, tune_pass, PlacementOutcome};
pub use power::{power_update_step, project_power, tune_power, PowerOutcome, PowerStep};
pub use schedule::{marginal_objective, schedule_devices, ScheduleTerms};
pub use target::{closed_form_target, relaxed_objective, snr_optimal_scale, RelaxedTarget};

use crate::channel::SystemParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub outer_iters: usize,
    pub placement_sweeps: usize,
    pub power_iters: usize,
    pub tolerance: f64,
    /// Coarse placement grid step in meters; a quarter wavelength when unset.
    pub grid_step: Option<f64>,
    pub grid_refinements: usize,
    pub min_scheduled: usize,
    pub seed: u64,
    /// Jittered placement restarts tried before giving up.
    pub restarts: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            outer_iters: 20,
            placement_sweeps: 10,
            power_iters: 50,
            tolerance: 1e-6,
            grid_step: None,
            grid_refinements: 2,
            min_scheduled: 6,
            seed: 0,
            restarts: 3,
        }
    }
}

impl SolverConfig {
    pub fn coarse_step(&self, params: &SystemParams) -> f64 {
        self.grid_step.unwrap_or(params.wavelength / 4.0)
    }

    pub fn validate(&self, params: &SystemParams) -> Result<()> {
        for (name, v) in [
            ("outer_iters", self.outer_iters),
            ("placement_sweeps", self.placement_sweeps),
            ("power_iters", self.power_iters),
            ("min_scheduled", self.min_scheduled),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be at least 1"));
            }
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance", "must be positive"));
        }
        let step = self.coarse_step(params);
        if !(step > 0.0 && step <= params.min_spacing) {
            return Err(Error::invalid(
                "grid_step",
                format!("must lie in (0, {}], got {step}", params.min_spacing),
            ));
        }
        Ok(())
    }
}

/// One outer iteration of the alternating loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub iteration: usize,
    /// `sum gamma |b|^2 / log2(snr)` after the iteration.
    pub objective: f64,
    /// Energy per model entry, `objective * R0 / B`.
    pub energy: f64,
    /// Placement residual after the PASS step (zero for the MIMO baseline).
    pub residual: f64,
    /// Dinkelbach ratios of the power step.
    pub etas: Vec<f64>,
    pub schedule: Vec<bool>,
    pub accepted_schedule: bool,
    pub accepted_placement: bool,
    pub accepted_power: bool,
    pub power_fallbacks: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub initial_objective: f64,
    pub records: Vec<OuterRecord>,
    pub restarts: usize,
}

impl SolveTrace {
    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.energy).collect()
    }
}
