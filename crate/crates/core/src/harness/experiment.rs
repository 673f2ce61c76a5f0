//! Single runs, the three-backend comparison and parameter sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSource, ExperimentConfig, SweepAxis};
use super::idx::load_mnist_idx;
use crate::error::{Error, Result};
use crate::fl::{establish_link, train, Backend, Dataset, GaussianBlobs, RoundReport, TrainConfig};
use crate::metrics::AirCompMetrics;
use crate::scenario::Scenario;

/// Pooled training data and the held-out test set.
#[derive(Debug, Clone)]
pub struct DataBundle {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_data(config: &ExperimentConfig) -> Result<DataBundle> {
    match config.fl.dataset {
        DatasetSource::Synthetic => {
            let s = &config.fl.synthetic;
            let blobs = GaussianBlobs {
                dim: s.dim,
                classes: s.classes,
                separation: s.separation,
                seed: config.scenario.seed,
            };
            let (train, test) = blobs.train_test(s.train_samples, s.test_samples)?;
            Ok(DataBundle { train, test })
        }
        DatasetSource::Mnist => {
            let paths = config.fl.mnist.as_ref().ok_or_else(|| Error::Config {
                key: "fl.mnist".into(),
                message: "missing IDX paths".into(),
            })?;
            Ok(DataBundle {
                train: load_mnist_idx(&paths.train_images, &paths.train_labels)?,
                test: load_mnist_idx(&paths.test_images, &paths.test_labels)?,
            })
        }
    }
}

/// Near-equal shard sizes for `total` samples over `devices` devices.
pub fn shard_sizes(total: usize, devices: usize) -> Vec<usize> {
    (0..devices).map(|k| total / devices + usize::from(k < total % devices)).collect()
}

/// Device layout for `config`; weights follow `dataset_sizes`.
pub fn generate_scenario(config: &ExperimentConfig, dataset_sizes: &[usize], seed: u64) -> Result<Scenario> {
    let s = &config.scenario;
    Scenario::random(s.region_edge, s.altitude, s.elements, s.waveguide_length, dataset_sizes, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub backend: Backend,
    pub seed: u64,
    /// Per-entry link metrics; absent for the ideal link.
    pub link: Option<AirCompMetrics>,
    pub schedule: Vec<bool>,
    pub rounds: Vec<RoundReport>,
}

impl RunOutcome {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.rounds.last().map(|r| r.accuracy)
    }

    pub fn mean_round_energy(&self) -> f64 {
        if self.rounds.is_empty() {
            return 0.0;
        }
        self.rounds.iter().map(|r| r.energy_total).sum::<f64>() / self.rounds.len() as f64
    }
}

/// Splits the data, places the devices, designs the link and trains.
pub fn run_training(config: &ExperimentConfig, data: &DataBundle, backend: Backend, seed: u64) -> Result<RunOutcome> {
    let k = config.scenario.devices;
    let shards = data.train.split_uniform(k, seed)?;
    let sizes: Vec<usize> = shards.iter().map(Dataset::len).collect();
    let scenario = generate_scenario(config, &sizes, seed)?;
    let params = config.system_params()?;
    let solver = crate::optimizer::SolverConfig {
        seed,
        ..config.solver_config()
    };
    let link = establish_link(backend, &params, &scenario, &solver, config.fl.mimo_antennas)?;
    let train_config = TrainConfig {
        architecture: config.fl.architecture_for(data.train.dim, data.train.classes)?,
        rounds: config.fl.rounds,
        epochs: config.fl.epochs,
        learning_rate: config.fl.learning_rate(),
        batch_size: config.fl.batch_size,
        delta_mode: config.fl.delta_mode,
        mimo_antennas: config.fl.mimo_antennas,
        seed,
    };
    let rounds = train(&train_config, &link, &params, &scenario.weights(), &shards, &data.test)?;
    Ok(RunOutcome {
        backend,
        seed,
        link: link.metrics,
        schedule: link.state.schedule,
        rounds,
    })
}

/// IDEAL, PASS and MIMO on the same placement and data split.
pub fn run_comparison(config: &ExperimentConfig, data: &DataBundle, seed: u64) -> Result<Vec<RunOutcome>> {
    [Backend::Ideal, Backend::Pass, Backend::Mimo]
        .par_iter()
        .map(|&b| run_training(config, data, b, seed))
        .collect()
}

/// `config` with the swept quantity set to `value`.
pub fn apply_axis(config: &ExperimentConfig, axis: SweepAxis, value: f64) -> ExperimentConfig {
    let mut c = config.clone();
    match axis {
        SweepAxis::D => c.scenario.region_edge = value,
        SweepAxis::PowerDbm => c.physics.power_dbm = value,
        SweepAxis::M => c.fl.mimo_antennas = value as usize,
        SweepAxis::N => c.scenario.elements = value as usize,
        SweepAxis::NoiseDbm => c.physics.noise_dbm = value,
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub value: f64,
    pub backend: Backend,
    pub repetition: usize,
    pub seed: u64,
    pub final_accuracy: Option<f64>,
    pub mean_round_energy: Option<f64>,
    /// Failure reason of an infeasible cell.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub backend: Backend,
    /// Mean over feasible repetitions; `None` when every repetition failed.
    pub mean_accuracy: Option<f64>,
    pub mean_round_energy: Option<f64>,
    pub feasible: usize,
    pub repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
    pub rows: Vec<SweepRow>,
}

/// Seed of repetition `r`; shared by every backend and axis value.
pub fn repetition_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

/// Runs every (value, backend, repetition) cell on the rayon pool. Failed
/// cells are kept as infeasible rows.
pub fn run_sweep(config: &ExperimentConfig, data: &DataBundle) -> Result<SweepTable> {
    let spec = &config.sweep;
    spec.validate()?;
    let jobs: Vec<(f64, Backend, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| spec.backends.iter().flat_map(move |&b| (0..spec.repetitions).map(move |r| (v, b, r))))
        .collect();
    let cells: Vec<SweepCell> = jobs
        .par_iter()
        .map(|&(value, backend, repetition)| {
            let seed = repetition_seed(config.scenario.seed, repetition);
            let cfg = apply_axis(config, spec.axis, value);
            let run = cfg.validate().and_then(|_| run_training(&cfg, data, backend, seed));
            match run {
                Ok(out) => SweepCell {
                    value,
                    backend,
                    repetition,
                    seed,
                    final_accuracy: out.final_accuracy(),
                    mean_round_energy: Some(out.mean_round_energy()),
                    error: None,
                },
                Err(e) => SweepCell {
                    value,
                    backend,
                    repetition,
                    seed,
                    final_accuracy: None,
                    mean_round_energy: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut rows = Vec::new();
    for group in cells.chunks(spec.repetitions) {
        let ok: Vec<&SweepCell> = group.iter().filter(|c| c.error.is_none()).collect();
        let mean = |f: fn(&SweepCell) -> Option<f64>| {
            let vals: Vec<f64> = ok.iter().filter_map(|c| f(c)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        rows.push(SweepRow {
            value: group[0].value,
            backend: group[0].backend,
            mean_accuracy: mean(|c| c.final_accuracy),
            mean_round_energy: mean(|c| c.mean_round_energy),
            feasible: ok.len(),
            repetitions: group.len(),
        });
    }
    Ok(SweepTable {
        axis: spec.axis,
        cells,
        rows,
    })
}
