//! Python bindings: physics parameters, scenarios, the link solvers, the
//! closed-form metrics and full training runs driven by a TOML config.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use passfl::channel::channel_vector;
use passfl::fl::Backend;
use passfl::harness::{dbm_to_watts, load_data, run_training, ExperimentConfig};
use passfl::metrics::{aggregation_mse, computation_snr, energy_objective};
use passfl::optimizer::{closed_form_target, joint_optimize, optimize_mimo_baseline, SolveTrace};
use passfl::{AirCompMetrics, MimoArray, Scenario, SolverConfig, SystemParams, TransceiverState};

fn py_err(e: passfl::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.kind()))
}

#[pyclass(name = "SystemParams", frozen, from_py_object)]
#[derive(Clone)]
struct PySystemParams(SystemParams);

#[pymethods]
impl PySystemParams {
    #[new]
    #[pyo3(signature = (carrier_frequency=5e9, refractive_index=1.4, noise_dbm=-90.0, power_dbm=0.0, bandwidth=1e6, resolution_bits=32.0, min_spacing=None))]
    fn new(
        carrier_frequency: f64,
        refractive_index: f64,
        noise_dbm: f64,
        power_dbm: f64,
        bandwidth: f64,
        resolution_bits: f64,
        min_spacing: Option<f64>,
    ) -> PyResult<Self> {
        SystemParams::new(
            carrier_frequency,
            refractive_index,
            dbm_to_watts(noise_dbm),
            dbm_to_watts(power_dbm),
            bandwidth,
            resolution_bits,
            min_spacing,
        )
        .map(Self)
        .map_err(py_err)
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.0.wavelength
    }

    #[getter]
    fn noise_power(&self) -> f64 {
        self.0.noise_power
    }

    #[getter]
    fn power_cap(&self) -> f64 {
        self.0.power_cap
    }

    #[getter]
    fn min_spacing(&self) -> f64 {
        self.0.min_spacing
    }

    fn __repr__(&self) -> String {
        format!(
            "SystemParams(wavelength={}, noise_power={}, power_cap={})",
            self.0.wavelength, self.0.noise_power, self.0.power_cap
        )
    }
}

#[pyclass(name = "Scenario", frozen, from_py_object)]
#[derive(Clone)]
struct PyScenario(Scenario);

#[pymethods]
impl PyScenario {
    /// Devices uniform in `[0, D] x [-D/2, D/2]`, weights proportional to
    /// `dataset_sizes`.
    #[staticmethod]
    #[pyo3(signature = (region_edge, elements, dataset_sizes, seed=0, altitude=5.0, waveguide_length=None))]
    fn random(
        region_edge: f64,
        elements: usize,
        dataset_sizes: Vec<usize>,
        seed: u64,
        altitude: f64,
        waveguide_length: Option<f64>,
    ) -> PyResult<Self> {
        Scenario::random(region_edge, altitude, elements, waveguide_length, &dataset_sizes, seed)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn devices(&self) -> Vec<(f64, f64)> {
        self.0.devices.iter().map(|d| (d.x, d.y)).collect()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights()
    }

    #[getter]
    fn waveguide_length(&self) -> f64 {
        self.0.waveguide_length
    }

    #[getter]
    fn element_count(&self) -> usize {
        self.0.element_count
    }

    /// Channel of every device for pinching elements at `positions`.
    fn channel(&self, params: &PySystemParams, positions: Vec<f64>) -> Vec<Complex64> {
        channel_vector(&params.0, &self.0.waveguide(positions), &self.0.devices)
    }
}

#[pyclass(name = "Solution", frozen, get_all)]
struct PySolution {
    positions: Vec<f64>,
    schedule: Vec<bool>,
    power_scalings: Vec<Complex64>,
    receive_scale: f64,
    channel: Vec<Complex64>,
    mse: f64,
    snr: f64,
    rate: f64,
    time: f64,
    total_energy: f64,
    energy_trace: Vec<f64>,
}

impl PySolution {
    fn from_parts(state: TransceiverState, channel: Vec<Complex64>, m: AirCompMetrics, trace: &SolveTrace) -> Self {
        PySolution {
            positions: state.positions,
            schedule: state.schedule,
            power_scalings: state.power_scalings,
            receive_scale: state.receive_scale,
            channel,
            mse: m.mse,
            snr: m.snr,
            rate: m.rate,
            time: m.time,
            total_energy: m.total_energy,
            energy_trace: trace.energies(),
        }
    }
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(scheduled={}, snr={:.4}, total_energy={:.4e})",
            self.schedule.iter().filter(|&&g| g).count(),
            self.snr,
            self.total_energy
        )
    }
}

fn solver(outer_iters: usize, min_scheduled: usize, seed: u64) -> SolverConfig {
    SolverConfig {
        outer_iters,
        min_scheduled,
        seed,
        ..SolverConfig::default()
    }
}

/// Joint placement, scheduling and power design for the waveguide server.
#[pyfunction]
#[pyo3(signature = (params, scenario, outer_iters=20, min_scheduled=6, seed=0))]
fn solve(params: &PySystemParams, scenario: &PyScenario, outer_iters: usize, min_scheduled: usize, seed: u64) -> PyResult<PySolution> {
    let sol = joint_optimize(&params.0, &scenario.0, &solver(outer_iters, min_scheduled, seed)).map_err(py_err)?;
    Ok(PySolution::from_parts(sol.state, sol.channel, sol.metrics, &sol.trace))
}

/// Same design for a fixed multi-antenna server at the region centre.
#[pyfunction]
#[pyo3(signature = (params, scenario, antennas=32, outer_iters=20, min_scheduled=6, seed=0))]
fn solve_mimo(
    params: &PySystemParams,
    scenario: &PyScenario,
    antennas: usize,
    outer_iters: usize,
    min_scheduled: usize,
    seed: u64,
) -> PyResult<PySolution> {
    let s = &scenario.0;
    let array = MimoArray::new([s.region_edge / 2.0, 0.0, s.altitude], antennas, params.0.wavelength / 2.0).map_err(py_err)?;
    let sol = optimize_mimo_baseline(&params.0, s, &array, &solver(outer_iters, min_scheduled, seed)).map_err(py_err)?;
    Ok(PySolution::from_parts(sol.state, sol.effective_channel, sol.metrics, &sol.trace))
}

fn state(schedule: Vec<bool>, power_scalings: Vec<Complex64>, receive_scale: f64) -> TransceiverState {
    TransceiverState::new(Vec::new(), schedule, power_scalings, receive_scale)
}

#[pyfunction(name = "aggregation_mse")]
fn py_aggregation_mse(
    channel: Vec<Complex64>,
    schedule: Vec<bool>,
    power_scalings: Vec<Complex64>,
    receive_scale: f64,
    weights: Vec<f64>,
    noise_power: f64,
) -> PyResult<f64> {
    aggregation_mse(&channel, &state(schedule, power_scalings, receive_scale), &weights, noise_power).map_err(py_err)
}

#[pyfunction(name = "computation_snr")]
fn py_computation_snr(
    channel: Vec<Complex64>,
    schedule: Vec<bool>,
    power_scalings: Vec<Complex64>,
    receive_scale: f64,
    weights: Vec<f64>,
    noise_power: f64,
) -> PyResult<f64> {
    computation_snr(&channel, &state(schedule, power_scalings, receive_scale), &weights, noise_power).map_err(py_err)
}

/// `sum |b_k|^2 / log2(snr)`; infinite when the SNR does not exceed one.
#[pyfunction(name = "energy_objective")]
fn py_energy_objective(
    channel: Vec<Complex64>,
    schedule: Vec<bool>,
    power_scalings: Vec<Complex64>,
    receive_scale: f64,
    weights: Vec<f64>,
    noise_power: f64,
) -> f64 {
    energy_objective(&channel, &state(schedule, power_scalings, receive_scale), &weights, noise_power)
}

/// `(receive_scale, effective_channel)` maximising the relaxed SNR for a norm budget.
#[pyfunction(name = "closed_form_target")]
fn py_closed_form_target(weights: Vec<f64>, norm_budget: f64) -> PyResult<(f64, Vec<f64>)> {
    let t = closed_form_target(&weights, norm_budget).map_err(py_err)?;
    Ok((t.receive_scale, t.effective_channel))
}

/// One training run; returns a list of per-round dicts.
#[pyfunction]
#[pyo3(signature = (config_toml="", backend="pass", seed=None))]
fn train<'py>(py: Python<'py>, config_toml: &str, backend: &str, seed: Option<u64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let config = ExperimentConfig::from_toml_str(config_toml).map_err(py_err)?;
    let backend: Backend = backend.parse().map_err(py_err)?;
    let seed = seed.unwrap_or(config.scenario.seed);
    let outcome = py
        .detach(|| load_data(&config).and_then(|data| run_training(&config, &data, backend, seed)))
        .map_err(py_err)?;
    outcome
        .rounds
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("round", r.round)?;
            d.set_item("backend", r.backend.name())?;
            d.set_item("accuracy", r.accuracy)?;
            d.set_item("energy_total", r.energy_total)?;
            d.set_item("snr", r.snr)?;
            d.set_item("time", r.time)?;
            d.set_item("mse", r.mse)?;
            d.set_item("schedule", r.schedule.clone())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn passfl_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySystemParams>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(solve_mimo, m)?)?;
    m.add_function(wrap_pyfunction!(py_aggregation_mse, m)?)?;
    m.add_function(wrap_pyfunction!(py_computation_snr, m)?)?;
    m.add_function(wrap_pyfunction!(py_energy_objective, m)?)?;
    m.add_function(wrap_pyfunction!(py_closed_form_target, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
