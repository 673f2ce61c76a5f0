//! Experiment configuration: TOML or JSON, unknown keys rejected, units in
//! meters, hertz, dBm and bits.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::channel::SystemParams;
use crate::error::{Error, Result};
use crate::fl::{Architecture, Backend};
use crate::optimizer::SolverConfig;

/// `x` dBm in watts. Whole decades are applied as exact powers of ten so
/// integer inputs stay within a few ulp.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    let decade = (dbm / 10.0).floor() - 3.0;
    let rest = 10f64.powf((dbm - 10.0 * (decade + 3.0)) / 10.0);
    if !(decade.abs() <= 22.0) {
        return 10f64.powf(dbm / 10.0) * 1e-3;
    }
    let n = decade.abs() as i32;
    if decade >= 0.0 {
        rest * 10f64.powi(n)
    } else {
        rest / 10f64.powi(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioBlock {
    pub devices: usize,
    pub min_scheduled: usize,
    /// Edge `D` of the square deployment region.
    pub region_edge: f64,
    pub altitude: f64,
    pub elements: usize,
    /// Waveguide length; the region edge when unset.
    pub waveguide_length: Option<f64>,
    pub seed: u64,
}

impl Default for ScenarioBlock {
    fn default() -> Self {
        ScenarioBlock {
            devices: 8,
            min_scheduled: 6,
            region_edge: 50.0,
            altitude: 5.0,
            elements: 32,
            waveguide_length: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsBlock {
    pub carrier_frequency: f64,
    pub noise_dbm: f64,
    pub power_dbm: f64,
    /// Minimum element spacing; half a wavelength when unset.
    pub min_spacing: Option<f64>,
    pub refractive_index: f64,
    pub bandwidth: f64,
    pub resolution_bits: f64,
}

impl Default for PhysicsBlock {
    fn default() -> Self {
        PhysicsBlock {
            carrier_frequency: 5e9,
            noise_dbm: -90.0,
            power_dbm: 0.0,
            min_spacing: None,
            refractive_index: 1.4,
            bandwidth: 1e6,
            resolution_bits: 32.0,
        }
    }
}

/// Solver knobs; the participation floor and seed come from the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverBlock {
    pub outer_iters: usize,
    pub placement_sweeps: usize,
    pub power_iters: usize,
    pub tolerance: f64,
    pub grid_step: Option<f64>,
    pub grid_refinements: usize,
    pub restarts: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let d = SolverConfig::default();
        SolverBlock {
            outer_iters: d.outer_iters,
            placement_sweeps: d.placement_sweeps,
            power_iters: d.power_iters,
            tolerance: d.tolerance,
            grid_step: d.grid_step,
            grid_refinements: d.grid_refinements,
            restarts: d.restarts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Cnn,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticBlock {
    pub dim: usize,
    pub classes: usize,
    pub separation: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

impl Default for SyntheticBlock {
    fn default() -> Self {
        SyntheticBlock {
            dim: 64,
            classes: 10,
            separation: 0.6,
            train_samples: 4000,
            test_samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Synthetic,
    Mnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlBlock {
    pub architecture: ModelKind,
    /// Hidden width of the MLP.
    pub hidden: usize,
    pub rounds: usize,
    pub epochs: usize,
    /// Defaults to 0.01 for the CNN and 0.05 otherwise.
    pub learning_rate: Option<f64>,
    pub batch_size: usize,
    pub dataset: DatasetSource,
    pub synthetic: SyntheticBlock,
    pub mnist: Option<MnistPaths>,
    pub backend: Backend,
    pub mimo_antennas: usize,
    pub delta_mode: bool,
}

impl Default for FlBlock {
    fn default() -> Self {
        FlBlock {
            architecture: ModelKind::Mlp,
            hidden: 64,
            rounds: 20,
            epochs: 2,
            learning_rate: None,
            batch_size: 64,
            dataset: DatasetSource::Synthetic,
            synthetic: SyntheticBlock::default(),
            mnist: None,
            backend: Backend::Pass,
            mimo_antennas: 32,
            delta_mode: false,
        }
    }
}

impl FlBlock {
    pub fn learning_rate(&self) -> f64 {
        self.learning_rate.unwrap_or(match self.architecture {
            ModelKind::Cnn => 0.01,
            _ => 0.05,
        })
    }

    /// Concrete architecture for `input`-dimensional samples.
    pub fn architecture_for(&self, input: usize, classes: usize) -> Result<Architecture> {
        let arch = match self.architecture {
            ModelKind::Mlp => Architecture::Mlp {
                input,
                hidden: self.hidden,
                classes,
            },
            ModelKind::Logistic => Architecture::Logistic { input, classes },
            ModelKind::Cnn => {
                let side = (input as f64).sqrt().round() as usize;
                if side * side != input {
                    return Err(Error::Config {
                        key: "fl.architecture".into(),
                        message: format!("cnn needs square images, got {input} features"),
                    });
                }
                Architecture::Cnn { side, classes }
            }
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputBlock {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputBlock {
    fn default() -> Self {
        OutputBlock {
            directory: PathBuf::from("results"),
            formats: vec![OutputFormat::Csv, OutputFormat::Json],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SweepAxis {
    /// Region edge in meters.
    D,
    #[serde(rename = "P_dBm")]
    PowerDbm,
    /// Array antennas of the baseline.
    M,
    /// Pinching elements.
    N,
    #[serde(rename = "noise_dBm")]
    NoiseDbm,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::D => "D",
            SweepAxis::PowerDbm => "P_dBm",
            SweepAxis::M => "M",
            SweepAxis::N => "N",
            SweepAxis::NoiseDbm => "noise_dBm",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub repetitions: usize,
    pub backends: Vec<Backend>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            axis: SweepAxis::D,
            values: vec![10.0, 50.0, 100.0, 200.0, 400.0],
            repetitions: 3,
            backends: vec![Backend::Pass, Backend::Mimo],
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(config_error("sweep.values", "must not be empty"));
        }
        if self.repetitions == 0 {
            return Err(config_error("sweep.repetitions", "must be at least 1"));
        }
        if self.backends.is_empty() {
            return Err(config_error("sweep.backends", "must not be empty"));
        }
        if matches!(self.axis, SweepAxis::M | SweepAxis::N) && self.values.iter().any(|v| !(*v >= 1.0 && v.fract() == 0.0)) {
            return Err(config_error("sweep.values", "counts must be positive integers"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioBlock,
    pub physics: PhysicsBlock,
    pub solver: SolverBlock,
    pub fl: FlBlock,
    pub output: OutputBlock,
    pub sweep: SweepSpec,
}

fn config_error(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn system_params(&self) -> Result<SystemParams> {
        let p = &self.physics;
        SystemParams::new(
            p.carrier_frequency,
            p.refractive_index,
            dbm_to_watts(p.noise_dbm),
            dbm_to_watts(p.power_dbm),
            p.bandwidth,
            p.resolution_bits,
            p.min_spacing,
        )
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            outer_iters: s.outer_iters,
            placement_sweeps: s.placement_sweeps,
            power_iters: s.power_iters,
            tolerance: s.tolerance,
            grid_step: s.grid_step,
            grid_refinements: s.grid_refinements,
            min_scheduled: self.scenario.min_scheduled,
            seed: self.scenario.seed,
            restarts: s.restarts,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.devices == 0 {
            return Err(config_error("scenario.devices", "must be at least 1"));
        }
        if s.min_scheduled == 0 || s.min_scheduled > s.devices {
            return Err(config_error("scenario.min_scheduled", format!("must lie in 1..={}", s.devices)));
        }
        if !(s.region_edge > 0.0) {
            return Err(config_error("scenario.region_edge", "must be positive"));
        }
        if !(s.altitude > 0.0) {
            return Err(config_error("scenario.altitude", "must be positive"));
        }
        if s.elements == 0 {
            return Err(config_error("scenario.elements", "must be at least 1"));
        }
        if self.fl.mimo_antennas == 0 {
            return Err(config_error("fl.mimo_antennas", "must be at least 1"));
        }
        if self.fl.dataset == DatasetSource::Mnist && self.fl.mnist.is_none() {
            return Err(config_error("fl.mnist", "dataset = \"mnist\" needs the four IDX paths"));
        }
        if !(self.fl.learning_rate() >= 0.0) {
            return Err(config_error("fl.learning_rate", "must be non-negative"));
        }
        let params = self.system_params().map_err(|e| config_error("physics", e.to_string()))?;
        self.solver_config()
            .validate(&params)
            .map_err(|e| config_error("solver", e.to_string()))?;
        self.sweep.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| parse_error(e.message(), &e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Accepts a bare config object or a run manifest with a `config` member.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| parse_error(&e.to_string(), &e.to_string()))?;
        let body = match value.get("config") {
            Some(inner) if value.get("seeds").is_some() => inner.clone(),
            _ => value,
        };
        let cfg: ExperimentConfig = serde_json::from_value(body).map_err(|e| parse_error(&e.to_string(), &e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Names the offending key when the parser reports one in backticks.
fn parse_error(message: &str, full: &str) -> Error {
    let key = message
        .split('`')
        .nth(1)
        .filter(|_| message.contains("unknown field") || message.contains("missing field") || message.contains("unknown variant"))
        .unwrap_or("")
        .to_string();
    Error::Config {
        key,
        message: full.trim().to_string(),
    }
}

/// Reads a `.json` file as JSON and anything else as TOML.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => ExperimentConfig::from_json_str(&text),
        _ => ExperimentConfig::from_toml_str(&text),
    }
}
