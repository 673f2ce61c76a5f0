//! FedAvg over a static channel, with the link configured once up front.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::Dataset;
use super::local::{local_update, LocalSchedule, Supervised};
use super::model::Architecture;
use super::round::{run_round, Uplink};
use crate::channel::{MimoArray, SystemParams};
use crate::error::{Error, Result};
use crate::metrics::{AirCompMetrics, TransceiverState};
use crate::optimizer::{joint_optimize, optimize_mimo_baseline, SolverConfig};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    /// Pinching-antenna waveguide server with joint optimisation.
    Pass,
    /// Digital array at the region centre.
    Mimo,
    /// Noiseless FedAvg with every device participating.
    Ideal,
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Pass => "pass",
            Backend::Mimo => "mimo",
            Backend::Ideal => "ideal",
        }
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pass" => Ok(Backend::Pass),
            "mimo" => Ok(Backend::Mimo),
            "ideal" => Ok(Backend::Ideal),
            other => Err(Error::invalid("backend", format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub rounds: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Transmit `local - global` instead of the local parameters.
    pub delta_mode: bool,
    /// Antennas of the array server.
    pub mimo_antennas: usize,
    pub seed: u64,
}

/// Per-round record of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub backend: Backend,
    pub schedule: Vec<bool>,
    /// Joules spent by all devices to upload the `d` entries.
    pub energy_total: f64,
    /// Seconds per entry; zero for the ideal link.
    pub time: f64,
    /// Computation SNR; `None` for the ideal link.
    pub snr: Option<f64>,
    pub accuracy: f64,
    pub mse: f64,
}

/// Channel and transceiver state shared by every round.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub backend: Backend,
    pub channel: Vec<Complex64>,
    pub state: TransceiverState,
    pub metrics: Option<AirCompMetrics>,
}

/// Solves the transceiver design for `backend` on `scenario`.
pub fn establish_link(
    backend: Backend,
    params: &SystemParams,
    scenario: &Scenario,
    solver: &SolverConfig,
    mimo_antennas: usize,
) -> Result<Link> {
    let k = scenario.device_count();
    match backend {
        Backend::Ideal => Ok(Link {
            backend,
            channel: vec![Complex64::new(1.0, 0.0); k],
            state: TransceiverState::new(Vec::new(), vec![true; k], vec![Complex64::new(0.0, 0.0); k], 0.0),
            metrics: None,
        }),
        Backend::Pass => {
            let sol = joint_optimize(params, scenario, solver)?;
            Ok(Link {
                backend,
                channel: sol.channel,
                state: sol.state,
                metrics: Some(sol.metrics),
            })
        }
        Backend::Mimo => {
            let array = MimoArray::new(
                [scenario.region_edge / 2.0, 0.0, scenario.altitude],
                mimo_antennas,
                params.wavelength / 2.0,
            )?;
            let sol = optimize_mimo_baseline(params, scenario, &array, solver)?;
            Ok(Link {
                backend,
                channel: sol.effective_channel,
                state: sol.state,
                metrics: Some(sol.metrics),
            })
        }
    }
}

/// Independent random stream for one purpose of one run.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) | index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init = 1,
    Device = 2,
    Channel = 3,
}

/// Runs `config.rounds` of FedAvg on `shards` (one per device) over `link`.
pub fn train(config: &TrainConfig, link: &Link, params: &SystemParams, weights: &[f64], shards: &[Dataset], test: &Dataset) -> Result<Vec<RoundReport>> {
    config.architecture.validate()?;
    let k = link.state.device_count();
    if shards.len() != k || weights.len() != k {
        return Err(Error::DimensionMismatch {
            what: "shards",
            got: shards.len(),
            expected: k,
        });
    }
    if shards.iter().any(Dataset::is_empty) {
        return Err(Error::EmptyDataset);
    }
    let dim = config.architecture.input_dim();
    if shards.iter().chain(std::iter::once(test)).any(|d| d.dim != dim) {
        return Err(Error::invalid("dataset", format!("feature dimension differs from the model input {dim}")));
    }

    let schedule = link.state.schedule.clone();
    let mut global = config.architecture.init(&mut substream(config.seed, Purpose::Init, 0));
    let d = global.len() as f64;
    let local_schedule = LocalSchedule {
        epochs: config.epochs,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
    };
    let (energy_total, time, snr) = match &link.metrics {
        Some(m) => (d * m.total_energy, m.time, Some(m.snr)),
        None => (0.0, 0.0, None),
    };

    let mut reports = Vec::with_capacity(config.rounds);
    for round in 0..config.rounds {
        let local: Vec<Vec<f64>> = (0..k)
            .into_par_iter()
            .map(|i| {
                if !schedule[i] {
                    return Ok(Vec::new());
                }
                let objective = Supervised {
                    architecture: config.architecture,
                    data: &shards[i],
                };
                let mut rng = substream(config.seed, Purpose::Device, ((round as u64) << 16) | i as u64);
                let mut s = local_update(&objective, &global, local_schedule, &mut rng)?;
                if config.delta_mode {
                    s.iter_mut().zip(&global).for_each(|(a, g)| *a -= g);
                }
                Ok(s)
            })
            .collect::<Result<_>>()?;

        let uplink = match link.backend {
            Backend::Ideal => Uplink::Ideal { schedule: &schedule },
            _ => Uplink::Analog {
                channel: &link.channel,
                state: &link.state,
                noise_power: params.noise_power,
            },
        };
        let mut noise = substream(config.seed, Purpose::Channel, round as u64);
        let outcome = run_round(uplink, &local, weights, &mut noise)?;
        if config.delta_mode {
            global.iter_mut().zip(&outcome.global).for_each(|(g, u)| *g += u);
        } else {
            global = outcome.global;
        }

        reports.push(RoundReport {
            round,
            backend: link.backend,
            schedule: schedule.clone(),
            energy_total,
            time,
            snr,
            accuracy: config.architecture.accuracy(&global, test),
            mse: outcome.empirical_mse,
        });
    }
    Ok(reports)
}
