//! CSV tables and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use csv::{Terminator, WriterBuilder};
use serde::Serialize;

use super::config::{ExperimentConfig, OutputFormat};
use super::experiment::{RunOutcome, SweepTable};
use crate::error::{Error, Result};

pub const ROUND_HEADER: [&str; 7] = ["round", "backend", "accuracy", "energy_total_J", "snr_dB", "time_s", "mse"];

/// Shortest `%g`-style rendering with six significant digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(format_sig6).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(file))
}

/// One line per round and backend; `snr_dB` is empty for the ideal link.
pub fn write_rounds_csv(path: &Path, runs: &[RunOutcome]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ROUND_HEADER)?;
    for run in runs {
        for r in &run.rounds {
            w.write_record([
                r.round.to_string(),
                r.backend.name().to_string(),
                format_sig6(r.accuracy),
                format_sig6(r.energy_total),
                optional(r.snr.map(|s| 10.0 * s.log10())),
                format_sig6(r.time),
                format_sig6(r.mse),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_csv(path: &Path, table: &SweepTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([table.axis.name(), "backend", "mean_accuracy", "mean_energy_J", "feasible", "repetitions"])?;
    for row in &table.rows {
        w.write_record([
            format_sig6(row.value),
            row.backend.name().to_string(),
            optional(row.mean_accuracy),
            optional(row.mean_round_energy),
            row.feasible.to_string(),
            row.repetitions.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_sweep_cells_csv(path: &Path, table: &SweepTable) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([table.axis.name(), "backend", "repetition", "seed", "final_accuracy", "mean_energy_J", "status"])?;
    for c in &table.cells {
        w.write_record([
            format_sig6(c.value),
            c.backend.name().to_string(),
            c.repetition.to_string(),
            c.seed.to_string(),
            optional(c.final_accuracy),
            optional(c.mean_round_energy),
            c.error.as_deref().map_or("ok".to_string(), |e| format!("infeasible: {e}")),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Resolved configuration plus the seeds that drove the run.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seeds: Vec<u64>,
    pub config: &'a ExperimentConfig,
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// What a command produced.
pub enum Results<'a> {
    Runs(&'a [RunOutcome]),
    Sweep(&'a SweepTable),
}

/// Writes the requested formats into `directory` and returns the paths.
pub fn emit_results(results: Results<'_>, config: &ExperimentConfig, command: &str, seeds: Vec<u64>, directory: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(directory).map_err(|e| Error::io(directory, e))?;
    let mut written = Vec::new();
    let formats = &config.output.formats;
    if formats.contains(&OutputFormat::Csv) {
        match &results {
            Results::Runs(runs) => {
                let p = directory.join("rounds.csv");
                write_rounds_csv(&p, runs)?;
                written.push(p);
            }
            Results::Sweep(table) => {
                let p = directory.join("sweep.csv");
                write_sweep_csv(&p, table)?;
                written.push(p);
                let p = directory.join("sweep_cells.csv");
                write_sweep_cells_csv(&p, table)?;
                written.push(p);
            }
        }
    }
    if formats.contains(&OutputFormat::Json) {
        let p = directory.join("results.json");
        match &results {
            Results::Runs(runs) => write_json(&p, runs)?,
            Results::Sweep(table) => write_json(&p, table)?,
        }
        written.push(p);
    }
    let p = directory.join("manifest.json");
    write_json(
        &p,
        &Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seeds,
            config,
        },
    )?;
    written.push(p);
    Ok(written)
}
