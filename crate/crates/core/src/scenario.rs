use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{Device, Waveguide};
use crate::error::{Error, Result};

/// Device placement plus the geometry of the server's waveguide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub devices: Vec<Device>,
    pub region_edge: f64,
    pub waveguide_length: f64,
    pub altitude: f64,
    pub element_count: usize,
}

impl Scenario {
    pub fn device_count(&self) -> usize {
        self.devices.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.weight).collect()
    }

    pub fn waveguide(&self, positions: Vec<f64>) -> Waveguide {
        Waveguide::new(self.waveguide_length, self.altitude, positions)
    }

    /// Devices i.i.d. uniform over `[0, D] x [-D/2, D/2]`, unit shadowing and
    /// weights proportional to the dataset sizes.
    ///
    /// The waveguide runs along `y = 0` with length `D` unless overridden.
    pub fn random(
        region_edge: f64,
        altitude: f64,
        element_count: usize,
        waveguide_length: Option<f64>,
        dataset_sizes: &[usize],
        seed: u64,
    ) -> Result<Self> {
        if !(region_edge > 0.0) {
            return Err(Error::invalid("region_edge", "must be positive"));
        }
        if !(altitude > 0.0) {
            return Err(Error::invalid("altitude", "must be positive"));
        }
        if dataset_sizes.contains(&0) {
            return Err(Error::invalid("dataset_sizes", "every device needs at least one sample"));
        }
        let total: usize = dataset_sizes.iter().sum();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let devices = dataset_sizes
            .iter()
            .map(|&size| {
                let x = rng.random::<f64>() * region_edge;
                let y = (rng.random::<f64>() - 0.5) * region_edge;
                Device {
                    x,
                    y,
                    shadowing: 1.0,
                    dataset_size: size,
                    weight: size as f64 / total as f64,
                }
            })
            .collect();
        Ok(Scenario {
            devices,
            region_edge,
            waveguide_length: waveguide_length.unwrap_or(region_edge),
            altitude,
            element_count,
        })
    }
}
